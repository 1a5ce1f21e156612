//! General form of the functional: weights `y = T^+ D(n) + x` with `x` in
//! `ker T`, minimized over feasible `x` and over phases.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::search::modified_newton_step;
use super::signs::{minimize_quadratic, minimize_signs};
use super::{
    admissible_states, rng_for, weight_constraints, FunctionalSample, KernelPoint, Method, PhaseMode,
    SearchOptions, WeightSampler,
};
use crate::error::{Error, Result};
use crate::interaction::SectorOperator;
use crate::linalg::{null_space, pseudoinverse};
use crate::polytope::DomainPolytope;
use crate::scalar::{lit, tol, to_f64, Scalar};

/// Radicands above `-RADICAND_TOL` count as feasible (and are clamped to zero).
pub const RADICAND_TOL: f64 = 1e-10;
const SCAN_POINTS: usize = 4000;

/// The affine family of weight vectors consistent with `n`, restricted to
/// the face of the domain containing `n`.
#[derive(Clone, Debug)]
pub struct KernelFamily<T: Scalar> {
    /// `T^+ D(n)` shifted onto the face.
    pub particular: DVector<T>,
    /// Orthonormal directions (columns) in `ker T` that stay on the face.
    pub directions: DMatrix<T>,
    /// Components of the face-restricted kernel coordinates in the full
    /// kernel basis: `x = kernel * (x0 + coords * z)`.
    x0: DVector<T>,
    coords: DMatrix<T>,
}

impl<T: Scalar> KernelFamily<T> {
    pub fn new(poly: &DomainPolytope<T>, n: &[T]) -> Result<Self> {
        if !poly.membership(n).is_inside() {
            return Err(Error::InfeasibleKernel);
        }
        let m = poly.sector().dim();
        let dist = DVector::from_vec(poly.facet_distances(n)?);
        let yp = poly.t_pinv() * dist;
        let k = poly.kernel().clone();
        let (basis, _) = admissible_states(poly, n).map_err(|_| Error::InfeasibleKernel)?;
        let off: Vec<usize> = (0..m).filter(|a| !basis.contains(a)).collect();
        let q = k.ncols();
        let (x0, coords) = if off.is_empty() || q == 0 {
            (DVector::zeros(q), DMatrix::identity(q, q))
        } else {
            let a = DMatrix::from_fn(off.len(), q, |i, j| k[(off[i], j)]);
            let b = DVector::from_fn(off.len(), |i, _| -yp[off[i]]);
            let (ap, _) = pseudoinverse(&a);
            (ap * b, null_space(&a))
        };
        let mut particular = &yp + &k * &x0;
        for &a in &off {
            particular[a] = T::zero();
        }
        let mut directions = &k * &coords;
        for &a in &off {
            directions.row_mut(a).fill(T::zero());
        }
        Ok(KernelFamily { particular, directions, x0, coords })
    }

    pub fn dim(&self) -> usize {
        self.directions.ncols()
    }

    pub fn weights(&self, z: &DVector<T>) -> DVector<T> {
        &self.particular + &self.directions * z
    }

    /// Face coordinates of a feasible weight vector.
    pub fn coordinates_of(&self, y: &DVector<T>) -> DVector<T> {
        self.directions.transpose() * (y - &self.particular)
    }

    /// Kernel vector `x` (full kernel basis) and radicands at face coordinates `z`.
    pub fn kernel_point(&self, poly: &DomainPolytope<T>, z: &DVector<T>) -> KernelPoint<T> {
        let xk = &self.x0 + &self.coords * z;
        let x = poly.kernel() * xk;
        KernelPoint {
            x: x.iter().copied().collect(),
            radicands: self.weights(z).iter().copied().collect(),
        }
    }

    /// Largest `t >= 0` with `y(z + t p) >= 0`.
    fn max_step(&self, z: &DVector<T>, p: &DVector<T>) -> T {
        let y = self.weights(z);
        let dy = &self.directions * p;
        let mut t = T::max_value().unwrap_or_else(|| lit(f64::MAX));
        for i in 0..y.len() {
            if dy[i] < T::zero() {
                t = t.min(y[i].max(T::zero()) / -dy[i]);
            }
        }
        t
    }
}

fn clamp<T: Scalar>(y: &DVector<T>) -> Option<Vec<T>> {
    let eps = tol::<T>(RADICAND_TOL);
    if y.iter().any(|&v| v < -eps) {
        return None;
    }
    Some(y.iter().map(|&v| v.max(T::zero())).collect())
}

/// Phase-minimized value at one kernel point, `None` if infeasible.
fn envelope<T: Scalar>(fam: &KernelFamily<T>, w: &DMatrix<T>, z: &DVector<T>, phase: PhaseMode) -> Option<(T, Option<Vec<T>>)> {
    let y = clamp(&fam.weights(z))?;
    let s: Vec<T> = y.iter().map(|&v| v.sqrt()).collect();
    let (v, eta) = minimize_quadratic(w, &s, phase, 0);
    Some((v, eta.map(|e| s.iter().zip(e).map(|(&a, b)| a * b).collect())))
}

/// Value, gradient and Hessian in `y` of `sum W_ab eta_a eta_b sqrt(y_a y_b)` for fixed signs.
fn derivatives<T: Scalar>(w: &DMatrix<T>, y: &DVector<T>, eta: &[T]) -> (DVector<T>, DMatrix<T>) {
    let m = y.len();
    let s: Vec<T> = y.iter().map(|&v| v.max(T::zero()).sqrt()).collect();
    let half: T = lit(0.5);
    let floor = tol::<T>(0.0);
    let mut g = DVector::<T>::zeros(m);
    let mut h = DMatrix::<T>::zeros(m, m);
    for a in 0..m {
        let sa = s[a].max(floor);
        let mut off = T::zero();
        for b in 0..m {
            if b != a {
                off += w[(a, b)] * eta[a] * eta[b] * s[b];
            }
        }
        g[a] = w[(a, a)] + off / sa;
        h[(a, a)] = -half * off / (sa * sa * sa);
        for b in 0..m {
            if b != a {
                h[(a, b)] = half * w[(a, b)] * eta[a] * eta[b] / (sa * s[b].max(floor));
            }
        }
    }
    (g, h)
}

/// Fixed-sign Newton descent from a strictly feasible start, re-optimizing
/// signs after every step; steps never cross the feasibility boundary.
fn descend<T: Scalar>(fam: &KernelFamily<T>, w: &DMatrix<T>, mut z: DVector<T>) -> (T, DVector<T>) {
    let Some((mut value, _)) = envelope(fam, w, &z, PhaseMode::Real) else {
        return (T::max_value().unwrap_or_else(|| lit(f64::MAX)), z);
    };
    let scale = T::one() + w.amax();
    for _ in 0..300 {
        let y = fam.weights(&z);
        let s: Vec<T> = y.iter().map(|&v| v.max(T::zero()).sqrt()).collect();
        let (_, eta) = minimize_signs(w, &s, 0);
        let (gy, hy) = derivatives(w, &y, &eta);
        let gz = fam.directions.transpose() * gy;
        if gz.amax() <= tol::<T>(1e-13) * scale {
            break;
        }
        let hz = fam.directions.transpose() * hy * &fam.directions;
        let mut p = modified_newton_step(&hz, &gz);
        if gz.dot(&p) >= T::zero() {
            p = -gz.clone();
        }
        let tmax = fam.max_step(&z, &p);
        let mut alpha = T::one().min(tmax * lit(0.99));
        let mut improved = false;
        for _ in 0..60 {
            let trial = &z + &p * alpha;
            if let Some((v, _)) = envelope(fam, w, &trial, PhaseMode::Real) {
                if v < value {
                    z = trial;
                    let gain = value - v;
                    value = v;
                    improved = gain > tol::<T>(1e-15) * scale;
                    break;
                }
            }
            alpha /= lit(2.0);
        }
        if !improved {
            break;
        }
    }
    (value, z)
}

/// One-dimensional families: dense scan plus golden-section refinement.
fn scan_line<T: Scalar>(fam: &KernelFamily<T>, w: &DMatrix<T>, phase: PhaseMode) -> Option<(T, DVector<T>)> {
    let e = DVector::from_element(1, T::one());
    let zero = DVector::zeros(1);
    let hi = fam.max_step(&zero, &e);
    let lo = -fam.max_step(&zero, &(-&e));
    let (lo, hi) = (to_f64(lo), to_f64(hi));
    if !lo.is_finite() || !hi.is_finite() {
        return None;
    }
    let at = |x: f64| -> f64 {
        envelope(fam, w, &DVector::from_element(1, lit(x)), phase).map_or(f64::INFINITY, |(v, _)| to_f64(v))
    };
    let width = hi - lo;
    let grid: Vec<f64> = (0..=SCAN_POINTS).map(|i| lo + width * i as f64 / SCAN_POINTS as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&x| at(x)).collect();
    let (ib, _) = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))?;
    let (mut a, mut b) = (grid[ib.saturating_sub(1)], grid[(ib + 1).min(SCAN_POINTS)]);
    let gr = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - gr * (b - a);
    let mut d = a + gr * (b - a);
    let (mut fc, mut fd) = (at(c), at(d));
    while (b - a).abs() > 1e-14 * (1.0 + width) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = at(d);
        }
    }
    let mut best = (at(0.5 * (a + b)), 0.5 * (a + b));
    for x in [lo, hi, grid[ib], c, d] {
        let v = at(x);
        if v < best.0 {
            best = (v, x);
        }
    }
    Some((lit(best.0), DVector::from_element(1, lit(best.1))))
}

#[derive(Clone, Debug)]
pub struct GeneralResult<T: Scalar> {
    pub sample: FunctionalSample<T>,
    pub kernel_point: KernelPoint<T>,
}

/// Minimizes the general form over feasible kernel vectors.
pub fn general_form_functional<T: Scalar>(
    poly: &DomainPolytope<T>,
    wmat: &SectorOperator<T>,
    n: &[T],
    opts: &SearchOptions,
) -> Result<GeneralResult<T>> {
    if wmat.dim() != poly.sector().dim() {
        return Err(Error::DimensionMismatch("operator and domain belong to different sectors".into()));
    }
    let w = &wmat.matrix;
    if poly.is_degenerate() {
        let kp = KernelPoint { x: vec![T::zero()], radicands: vec![T::one()] };
        return Ok(GeneralResult { sample: sample(n, w[(0, 0)], Some(vec![T::one()])), kernel_point: kp });
    }
    let fam = KernelFamily::new(poly, n)?;
    let q = fam.dim();
    let mut candidates: Vec<(T, DVector<T>)> = Vec::new();
    if q == 0 {
        let z = DVector::zeros(0);
        let (v, _) = envelope(&fam, w, &z, opts.phase).ok_or(Error::InfeasibleKernel)?;
        candidates.push((v, z));
    } else {
        if q == 1 {
            if let Some(c) = scan_line(&fam, w, opts.phase) {
                candidates.push(c);
            }
        }
        let (basis, _) = admissible_states(poly, n).map_err(|_| Error::InfeasibleKernel)?;
        let (b, r) = weight_constraints(poly, &basis, n);
        let mut master = rng_for(opts.seed, 0);
        let sampler = WeightSampler::new(b, r, &mut master).map_err(|_| Error::InfeasibleKernel)?;
        let m = poly.sector().dim();
        let lift = |ys: &DVector<T>| {
            let mut y = DVector::<T>::zeros(m);
            for (i, &a) in basis.iter().enumerate() {
                y[a] = ys[i];
            }
            y
        };
        let starts: Vec<DVector<T>> = (0..opts.starts.max(1))
            .map(|k| {
                let mut rng = rng_for(opts.seed, 1 + k as u64);
                let ys = if k == 0 { sampler.center().clone() } else { sampler.random(&mut rng) };
                // keep starts strictly inside when possible
                let ys = (&ys * lit::<T>(0.9)) + sampler.center() * lit::<T>(0.1);
                fam.coordinates_of(&lift(&ys))
            })
            .collect();
        let runs: Vec<(T, DVector<T>)> = starts.into_par_iter().map(|z0| descend(&fam, w, z0)).collect();
        candidates.extend(runs);
        if opts.phase == PhaseMode::Complex {
            // re-evaluate the real-sign optima with phases
            let refined: Vec<(T, DVector<T>)> = candidates
                .iter()
                .filter_map(|(_, z)| envelope(&fam, w, z, PhaseMode::Complex).map(|(v, _)| (v, z.clone())))
                .collect();
            candidates.extend(refined);
        }
    }
    let (_, zbest) = candidates
        .into_iter()
        .filter(|(v, _)| v.is_finite())
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal))
        .ok_or(Error::InfeasibleKernel)?;
    let (value, minimizer) = envelope(&fam, w, &zbest, opts.phase).ok_or(Error::InfeasibleKernel)?;
    let kernel_point = fam.kernel_point(poly, &zbest);
    Ok(GeneralResult { sample: sample(n, value, minimizer), kernel_point })
}

fn sample<T: Scalar>(n: &[T], value: T, minimizer: Option<Vec<T>>) -> FunctionalSample<T> {
    FunctionalSample {
        n: n.to_vec(),
        value,
        gradient: None,
        minimizer,
        method: Method::GeneralForm,
        degenerate: false,
    }
}

/// Value of the general form at an explicit kernel point (upper bound on the functional).
pub fn evaluate_kernel_point<T: Scalar>(
    poly: &DomainPolytope<T>,
    wmat: &SectorOperator<T>,
    n: &[T],
    x: &[T],
) -> Result<T> {
    let dist = DVector::from_vec(poly.facet_distances(n)?);
    let y = poly.t_pinv() * dist + DVector::from_column_slice(x);
    let y = clamp(&y).ok_or(Error::InfeasibleKernel)?;
    let s: Vec<T> = y.iter().map(|&v| v.sqrt()).collect();
    Ok(minimize_signs(&wmat.matrix, &s, 0).0)
}
