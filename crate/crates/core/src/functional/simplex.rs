//! Closed form of the functional when the domain is a simplex whose vertices
//! are exactly the sector's configuration states.

use super::signs::minimize_quadratic;
use super::{FunctionalSample, Method, PhaseMode};
use crate::error::{Error, Result};
use crate::interaction::SectorOperator;
use crate::polytope::DomainPolytope;
use crate::scalar::Scalar;

/// `|c_alpha|^2 = D_alpha(n) / L_alpha`, where facet `alpha` is the one opposite vertex `alpha`.
pub fn simplex_weights<T: Scalar>(poly: &DomainPolytope<T>, n: &[T]) -> Result<Vec<T>> {
    if !poly.is_simplex_setting() {
        return Err(Error::NotSimplex);
    }
    if !poly.membership(n).is_inside() {
        return Err(Error::InfeasibleTarget);
    }
    let dist = poly.facet_distances(n)?;
    Ok((0..dist.len())
        .map(|a| (dist[a] / poly.distance(a, a)).max(T::zero()))
        .collect())
}

pub fn simplex_functional<T: Scalar>(
    poly: &DomainPolytope<T>,
    wmat: &SectorOperator<T>,
    n: &[T],
    phase: PhaseMode,
) -> Result<FunctionalSample<T>> {
    let y = simplex_weights(poly, n)?;
    let s: Vec<T> = y.iter().map(|&v| v.sqrt()).collect();
    let (value, eta) = minimize_quadratic(&wmat.matrix, &s, phase, 0);
    let minimizer = eta.map(|e| s.iter().zip(e).map(|(&a, b)| a * b).collect());
    Ok(FunctionalSample {
        n: n.to_vec(),
        value,
        gradient: None,
        minimizer,
        method: Method::SimplexForm,
        degenerate: false,
    })
}
