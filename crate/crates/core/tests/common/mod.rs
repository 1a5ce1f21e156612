#![allow(dead_code)]

use bgrdmft::interaction::{build_interaction_matrix, hubbard_interaction};
use bgrdmft::{build_domain, enumerate_sector, DomainPolytope, Sector, SectorOperator};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn hubbard(d: usize, n: u32, p: usize) -> (DomainPolytope, SectorOperator) {
    let s = enumerate_sector(d, n, p).unwrap();
    let w = build_interaction_matrix(&hubbard_interaction(d), &s).unwrap();
    (build_domain(&s).unwrap(), w)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random mixture of the sector's configuration occupations.
pub fn mixture(poly: &DomainPolytope, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let s = poly.sector();
    let e: Vec<f64> = (0..s.dim()).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = e.iter().sum();
    let mut n = vec![0.0; s.d()];
    for (a, st) in s.states().iter().enumerate() {
        for (k, &x) in st.occ().iter().enumerate() {
            n[k] += e[a] / total * x as f64;
        }
    }
    n
}

pub fn hubbard_g(n: f64) -> f64 {
    -(4.0 * 2f64.powf(0.25) * 3f64.powf(0.75) / 9.0) * (n * (n - 1.0)).sqrt()
}

/// Sectors with `d` in 2..=5 and between 2 and `max_dim` states.
pub fn small_sectors(max_dim: usize) -> Vec<Sector> {
    let mut out = Vec::new();
    for d in 2..=5 {
        for n in 1..=14u32 {
            for p in 0..d {
                if let Ok(s) = enumerate_sector(d, n, p) {
                    if s.dim() <= max_dim && s.dim() >= 2 {
                        out.push(s);
                    }
                }
            }
        }
    }
    out
}

/// Floating-point brute force: every k-subset of states spanning a
/// hyperplane of the affine hull with all states on one side.
pub fn oracle_facets(points: &[Vec<f64>]) -> (usize, Vec<(Vec<f64>, f64)>) {
    let d = points[0].len();
    let m = points.len();
    let diffs = DMatrix::from_fn(m - 1, d, |i, j| points[i + 1][j] - points[0][j]);
    // direction space of the affine hull: eigenvectors of the (integer) Gram matrix
    let eig = (diffs.transpose() * &diffs).symmetric_eigen();
    let basis: Vec<DVector<f64>> =
        (0..d).filter(|&i| eig.eigenvalues[i] > 1e-9).map(|i| eig.eigenvectors.column(i).into_owned()).collect();
    let k = basis.len();
    let coords: Vec<DVector<f64>> = points
        .iter()
        .map(|p| DVector::from_fn(k, |i, _| (0..d).map(|j| basis[i][j] * (p[j] - points[0][j])).sum()))
        .collect();
    let mut facets: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut subset: Vec<usize> = (0..k).collect();
    loop {
        let a = DMatrix::from_fn(k - 1, k, |i, j| coords[subset[i + 1]][j] - coords[subset[0]][j]);
        let ns = if k == 1 {
            Some(DVector::from_element(1, 1.0))
        } else {
            let full = a.transpose() * a.clone();
            let eig = full.symmetric_eigen();
            let small: Vec<usize> = (0..k).filter(|&i| eig.eigenvalues[i].abs() < 1e-9).collect();
            if small.len() == 1 { Some(eig.eigenvectors.column(small[0]).into_owned()) } else { None }
        };
        if let Some(u) = ns {
            let u = u.normalize();
            let off = -u.dot(&coords[subset[0]]);
            let vals: Vec<f64> = coords.iter().map(|c| u.dot(c) + off).collect();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sign = if lo >= -1e-9 { Some(1.0) } else if hi <= 1e-9 { Some(-1.0) } else { None };
            if let Some(sg) = sign {
                // back to occupation space: kappa = sum_i u_i basis_i, D(n) = kappa.n + mu
                let kappa: Vec<f64> = (0..d).map(|j| sg * (0..k).map(|i| u[i] * basis[i][j]).sum::<f64>()).collect();
                let mu = -(0..d).map(|j| kappa[j] * points[subset[0]][j]).sum::<f64>();
                let dup = facets.iter().any(|(kk, mm)| (mm - mu).abs() < 1e-7 && kk.iter().zip(&kappa).all(|(x, y)| (x - y).abs() < 1e-7));
                if !dup {
                    facets.push((kappa, mu));
                }
            }
        }
        // next k-subset in lexicographic order
        let mut i = k;
        loop {
            if i == 0 {
                return (k, facets);
            }
            i -= 1;
            if subset[i] < m - k + i {
                subset[i] += 1;
                for j in i + 1..k {
                    subset[j] = subset[j - 1] + 1;
                }
                break;
            }
        }
    }
}

