//! The one-parameter exact functional of the Hubbard `(3,3,0)` sector, the
//! polynomial minimizer ansatz and the error studies built on it.
//!
//! The kernel coordinate is `z = 1/4 - 3 xi`, the weight of `|1,1,1>`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interaction::{build_interaction_matrix, hubbard_interaction, sorted_eigen};
use crate::io::CsvTable;
use crate::sector::enumerate_sector;

/// Pre-scan resolution in `z`.
pub const SCAN_STEP: f64 = 1e-3;
/// Final golden-section bracket width.
pub const BRACKET_TOL: f64 = 1e-10;
const RANGE_SLACK: f64 = 1e-12;

fn check(n: &[f64]) -> Result<()> {
    if n.len() != 3 {
        return Err(Error::DimensionMismatch(format!("expected 3 occupations, got {}", n.len())));
    }
    let total: f64 = n.iter().sum();
    if (total - 3.0).abs() > 1e-9 {
        return Err(Error::OffHyperplane { expected: 3.0, got: total });
    }
    if n.iter().any(|&x| x < -1e-12) {
        return Err(Error::InfeasibleTarget);
    }
    Ok(())
}

pub fn z_max(n: &[f64]) -> f64 {
    n.iter().copied().fold(f64::INFINITY, f64::min).max(0.0)
}

fn f_unchecked(n: &[f64], z: f64) -> f64 {
    let z = z.max(0.0);
    let sum: f64 = n.iter().map(|&nk| ((nk - z).max(0.0) / 3.0).sqrt()).sum();
    2.0 + 2.0 * z - 4.0 * 6f64.sqrt() / 3.0 * sum * z.sqrt()
}

/// `2 + 2z - (4 sqrt6 / 3) sum_k sqrt((n_k - z)/3) sqrt(z)` for `0 <= z <= z_max(n)`.
pub fn f_of_z(n: &[f64], z: f64) -> Result<f64> {
    check(n)?;
    let zm = z_max(n);
    if !(z >= -RANGE_SLACK && z <= zm + RANGE_SLACK) {
        return Err(Error::OutOfRange(format!("z = {z} outside [0, {zm}]")));
    }
    Ok(f_unchecked(n, z.clamp(0.0, zm)))
}

fn golden(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > BRACKET_TOL {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Minimizer `z_bar` and the exact functional value at `n`.
pub fn exact_zbar(n: &[f64]) -> Result<(f64, f64)> {
    check(n)?;
    let zm = z_max(n);
    if zm <= 0.0 {
        return Ok((0.0, f_unchecked(n, 0.0)));
    }
    let steps = ((zm / SCAN_STEP).ceil() as usize).max(64);
    let h = zm / steps as f64;
    let f = |z: f64| f_unchecked(n, z);
    let mut best = (0usize, f(0.0));
    for i in 1..=steps {
        let v = f(i as f64 * h);
        if v < best.1 {
            best = (i, v);
        }
    }
    let lo = (best.0.saturating_sub(1)) as f64 * h;
    let hi = ((best.0 + 1).min(steps)) as f64 * h;
    let mut cand = [golden(f, lo, hi.min(zm)), (0.0, f(0.0)), (zm, f(zm))];
    cand.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(cand[0])
}

/// `z_max (z_max^2/3 - z_max + 1)`.
pub fn approx_zbar(zmax: f64) -> f64 {
    zmax * (zmax * zmax / 3.0 - zmax + 1.0)
}

/// Upper bound obtained by inserting the ansatz minimizer.
pub fn approx_functional(n: &[f64]) -> Result<f64> {
    check(n)?;
    Ok(f_unchecked(n, approx_zbar(z_max(n)).min(z_max(n))))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorPoint {
    pub n: [f64; 3],
    pub f_exact: f64,
    pub f_approx: f64,
    pub zbar_exact: f64,
    pub zbar_approx: f64,
}

impl ErrorPoint {
    pub fn error(&self) -> f64 {
        self.f_approx - self.f_exact
    }
}

/// Barycentric lattice `n = 3 (i, j, k) / resolution` over the domain.
pub fn barycentric_points(resolution: usize) -> Vec<[f64; 3]> {
    let r = resolution.max(1);
    let mut out = Vec::with_capacity((r + 1) * (r + 2) / 2);
    for i in 0..=r {
        for j in 0..=r - i {
            let k = r - i - j;
            let s = 3.0 / r as f64;
            out.push([i as f64 * s, j as f64 * s, k as f64 * s]);
        }
    }
    out
}

/// Approximate vs exact functional on the barycentric lattice.
pub fn error_grid(resolution: usize) -> Vec<ErrorPoint> {
    barycentric_points(resolution)
        .into_par_iter()
        .map(|n| {
            let (zbar_exact, f_exact) = exact_zbar(&n).expect("lattice point in domain");
            let zm = z_max(&n);
            ErrorPoint {
                n,
                f_exact,
                f_approx: approx_functional(&n).expect("lattice point in domain"),
                zbar_exact,
                zbar_approx: approx_zbar(zm),
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub resolution: usize,
    pub max_error: f64,
    pub argmax: [f64; 3],
    pub min_error: f64,
    pub f_min: f64,
    pub f_max: f64,
    /// `max_error / (f_max - f_min)`
    pub relative: f64,
}

pub fn summarize(points: &[ErrorPoint], resolution: usize) -> ErrorSummary {
    let mut worst = &points[0];
    for p in points {
        if p.error() > worst.error() {
            worst = p;
        }
    }
    let min_error = points.iter().map(ErrorPoint::error).fold(f64::INFINITY, f64::min);
    let f_min = points.iter().map(|p| p.f_exact).fold(f64::INFINITY, f64::min);
    let f_max = points.iter().map(|p| p.f_exact).fold(f64::NEG_INFINITY, f64::max);
    ErrorSummary {
        resolution,
        max_error: worst.error(),
        argmax: worst.n,
        min_error,
        f_min,
        f_max,
        relative: worst.error() / (f_max - f_min),
    }
}

/// Spread of the exact minimizer at fixed `z_max`: `(bin center, min, max)` per bin.
pub fn zbar_spread(points: &[ErrorPoint], bins: usize) -> Vec<(f64, f64, f64)> {
    let bins = bins.max(1);
    let mut acc = vec![(f64::INFINITY, f64::NEG_INFINITY); bins];
    for p in points {
        let b = ((z_max(&p.n) * bins as f64) as usize).min(bins - 1);
        acc[b].0 = acc[b].0.min(p.zbar_exact);
        acc[b].1 = acc[b].1.max(p.zbar_exact);
    }
    acc.into_iter()
        .enumerate()
        .filter(|(_, (lo, _))| lo.is_finite())
        .map(|(b, (lo, hi))| ((b as f64 + 0.5) / bins as f64, lo, hi))
        .collect()
}

/// `dF/deps` along the normal of the facet `n_0 = 0` from `n*`, by central
/// differences with relative step `1e-2`.
pub fn normal_derivative(n_star: &[f64], eps: f64) -> Result<f64> {
    let kappa = [2.0 / 6f64.sqrt(), -1.0 / 6f64.sqrt(), -1.0 / 6f64.sqrt()];
    let at = |e: f64| -> Result<f64> {
        let n: Vec<f64> = (0..3).map(|k| n_star[k] + e * kappa[k]).collect();
        Ok(exact_zbar(&n)?.1)
    };
    let h = 1e-2 * eps;
    Ok((at(eps + h)? - at(eps - h)?) / (2.0 * h))
}

/// `t(r, theta) = M (r cos theta, r sin theta) + (1,1,1)/3`.
pub fn disk_kinetic(r: f64, theta: f64) -> [f64; 3] {
    let (a, b) = (1.0 / 6f64.sqrt(), 1.0 / 2f64.sqrt());
    let (x, y) = (r * theta.cos(), r * theta.sin());
    [-a * x - b * y + 1.0 / 3.0, -a * x + b * y + 1.0 / 3.0, 2.0 * a * x + 1.0 / 3.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiskPoint {
    pub r: f64,
    pub theta: f64,
    pub e_exact: f64,
    pub e_approx: f64,
}

impl DiskPoint {
    pub fn delta(&self) -> f64 {
        self.e_approx - self.e_exact
    }
}

fn hubbard_330() -> (Vec<[f64; 3]>, DMatrix<f64>) {
    let s = enumerate_sector(3, 3, 0).expect("valid sector");
    let w = build_interaction_matrix(&hubbard_interaction::<f64>(3), &s).expect("hubbard");
    let occ = s.occupations_f64().into_iter().map(|v| [v[0], v[1], v[2]]).collect();
    (occ, w.matrix)
}

// n = n* + a u + b v on the plane sum n = 3
fn minimize_on_domain(f: impl Fn(&[f64; 3]) -> f64, start: [f64; 3], step: f64) -> f64 {
    let u = [1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt(), 0.0];
    let v = [1.0 / 6f64.sqrt(), 1.0 / 6f64.sqrt(), -2.0 / 6f64.sqrt()];
    let mut x = start;
    let mut fx = f(&x);
    let mut h = step;
    while h > 1e-9 {
        let mut moved = false;
        for (du, dv) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (0.7, 0.7), (-0.7, -0.7), (0.7, -0.7), (-0.7, 0.7)] {
            let y: [f64; 3] = std::array::from_fn(|k| x[k] + h * (du * u[k] + dv * v[k]));
            if y.iter().any(|&c| c < 0.0) {
                continue;
            }
            let fy = f(&y);
            if fy < fx {
                x = y;
                fx = fy;
                moved = true;
                break;
            }
        }
        if !moved {
            h *= 0.5;
        }
    }
    fx
}

/// Exact ground-state energies on the disk versus `min_n (t.n + F_approx[n])`.
/// The minimum starts from the best point of a barycentric grid of the given
/// resolution and is refined by pattern search.
pub fn energy_error_study(r_steps: usize, theta_steps: usize, resolution: usize) -> Vec<DiskPoint> {
    let (occ, w) = hubbard_330();
    let grid: Vec<([f64; 3], f64)> = barycentric_points(resolution)
        .into_par_iter()
        .map(|n| (n, approx_functional(&n).expect("in domain")))
        .collect();
    let rs = r_steps.max(1);
    let ts = theta_steps.max(1);
    let params: Vec<(f64, f64)> = (0..=rs)
        .flat_map(|i| (0..ts).map(move |j| (i as f64 / rs as f64, std::f64::consts::TAU * j as f64 / ts as f64)))
        .collect();
    params
        .into_par_iter()
        .map(|(r, theta)| {
            let t = disk_kinetic(r, theta);
            let tn = |n: &[f64; 3]| t[0] * n[0] + t[1] * n[1] + t[2] * n[2];
            let mut h = w.clone();
            for (a, n) in occ.iter().enumerate() {
                h[(a, a)] += tn(n);
            }
            let e_exact = sorted_eigen(&h).0[0];
            let (start, _) = grid
                .iter()
                .map(|(n, f)| (*n, f + tn(n)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("nonempty grid");
            let e_approx = minimize_on_domain(|n| tn(n) + approx_functional(n).unwrap_or(f64::INFINITY), start, 3.0 / resolution as f64);
            DiskPoint { r, theta, e_exact, e_approx }
        })
        .collect()
}

pub fn error_grid_csv(points: &[ErrorPoint], meta: &[(&str, String)]) -> String {
    let mut t = CsvTable::new(&["n0", "n1", "n2", "F_exact", "F_approx", "zbar_exact", "zbar_approx"]);
    for (k, v) in meta {
        t.meta(k, v);
    }
    for p in points {
        t.push_floats(&[p.n[0], p.n[1], p.n[2], p.f_exact, p.f_approx, p.zbar_exact, p.zbar_approx]);
    }
    t.render()
}

pub fn disk_csv(points: &[DiskPoint], meta: &[(&str, String)]) -> String {
    let mut t = CsvTable::new(&["r", "theta", "E_exact", "E_approx", "dE"]);
    for (k, v) in meta {
        t.meta(k, v);
    }
    for p in points {
        t.push_floats(&[p.r, p.theta, p.e_exact, p.e_approx, p.delta()]);
    }
    t.render()
}
