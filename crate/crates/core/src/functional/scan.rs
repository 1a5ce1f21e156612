//! Legendre scan: ground states of `t + W` give `F[n] = E_0(t) - t . n` and `grad F = -t`.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{rng_for, FunctionalSample, Method};
use crate::error::Result;
use crate::interaction::{build_hamiltonian, ground_state, KineticVector, SectorOperator};
use crate::polytope::DomainPolytope;
use crate::scalar::{lit, tol, Scalar};

/// Eigen-gaps below this mark a sample as degenerate.
pub const GAP_THRESHOLD: f64 = 1e-9;

/// Projects `v` onto the tangent space of the domain.
pub fn project_tangent<T: Scalar>(poly: &DomainPolytope<T>, v: &[T]) -> Vec<T> {
    let basis = poly.tangent_basis();
    let x = DVector::from_column_slice(v);
    let p = basis * (basis.transpose() * x);
    p.iter().copied().collect()
}

/// One Legendre sample per kinetic vector, in input order.
pub fn t_scan<T: Scalar>(
    poly: &DomainPolytope<T>,
    wmat: &SectorOperator<T>,
    t_list: &[KineticVector<T>],
) -> Result<Vec<FunctionalSample<T>>> {
    t_list
        .par_iter()
        .map(|t| {
            let h = build_hamiltonian(t, wmat)?;
            let gs = ground_state(&h)?;
            let m = wmat.dim();
            let y: Vec<T> = (0..m).map(|a| gs.coefficients[a] * gs.coefficients[a]).collect();
            let n = super::occupations_from_weights(poly, &y);
            let value = gs.energy - t.dot(&n);
            let grad: Vec<T> = project_tangent(poly, &t.0).into_iter().map(|x| -x).collect();
            Ok(FunctionalSample {
                n,
                value,
                gradient: Some(grad),
                minimizer: Some(gs.coefficients.iter().copied().collect()),
                method: Method::TScan,
                degenerate: gs.gap < tol::<T>(GAP_THRESHOLD),
            })
        })
        .collect()
}

/// Random kinetic vectors: uniform directions in the plane `sum t = 0`
/// times radii log-uniform in `[r_min, r_max]`.
pub fn kinetic_sweep<T: Scalar>(d: usize, count: usize, r_min: f64, r_max: f64, seed: u64) -> Vec<KineticVector<T>> {
    let mut rng = rng_for(seed, 0xface);
    (0..count)
        .map(|_| {
            let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let mean = v.iter().sum::<f64>() / d as f64;
            for x in v.iter_mut() {
                *x -= mean;
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            let u: f64 = rng.random();
            let r = (r_min.ln() + u * (r_max.ln() - r_min.ln())).exp();
            KineticVector(v.iter().map(|&x| lit(x / norm * r)).collect())
        })
        .collect()
}

/// Dense angular sweep in the `d = 3` tangent plane at the given radii.
pub fn angular_sweep<T: Scalar>(radii: &[f64], angles: usize) -> Vec<KineticVector<T>> {
    let e1 = [1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt(), 0.0];
    let e2 = [1.0 / 6f64.sqrt(), 1.0 / 6f64.sqrt(), -2.0 / 6f64.sqrt()];
    let mut out = Vec::with_capacity(radii.len() * angles);
    for &r in radii {
        for i in 0..angles {
            let th = std::f64::consts::TAU * i as f64 / angles as f64;
            let (c, s) = (th.cos(), th.sin());
            out.push(KineticVector((0..3).map(|k| lit(r * (c * e1[k] + s * e2[k]))).collect()));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interaction::{build_interaction_matrix, hubbard_interaction};
    use crate::polytope::build_domain;
    use crate::sector::enumerate_sector;

    #[test]
    fn zero_and_uniform_kinetic_vectors() {
        let s = enumerate_sector(3, 3, 0).unwrap();
        let w = build_interaction_matrix(&hubbard_interaction(3), &s).unwrap();
        let p: DomainPolytope<f64> = build_domain(&s).unwrap();
        let ts = vec![KineticVector(vec![0.0; 3]), KineticVector(vec![0.7; 3])];
        let out = t_scan(&p, &w, &ts).unwrap();
        let e0 = ground_state(&w).unwrap().energy;
        assert!((out[0].value - e0).abs() < 1e-12);
        assert!((out[1].value - out[0].value).abs() < 1e-12);
        for k in 0..3 {
            assert!((out[0].n[k] - out[1].n[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn sweeps_lie_in_tangent_plane() {
        for t in kinetic_sweep::<f64>(4, 20, 1e-2, 1e2, 3) {
            assert!(t.0.iter().sum::<f64>().abs() < 1e-12);
            let r = t.0.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((1e-2 - 1e-12..=1e2 + 1e-9).contains(&r));
        }
        let a = angular_sweep::<f64>(&[2.0], 8);
        assert_eq!(a.len(), 8);
        assert!((a[3].0.iter().map(|x| x * x).sum::<f64>().sqrt() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn deep_minimum_does_not_pin() {
        let s = enumerate_sector(3, 6, 0).unwrap();
        let w = build_interaction_matrix(&hubbard_interaction(3), &s).unwrap();
        let p: DomainPolytope<f64> = build_domain(&s).unwrap();
        let out = t_scan(&p, &w, &[KineticVector(vec![-5.0, 2.5, 2.5])]).unwrap();
        for dj in p.facet_distances(&out[0].n).unwrap() {
            assert!(dj > 0.0);
        }
    }
}
