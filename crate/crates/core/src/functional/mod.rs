//! The universal interaction functional: constrained search, Legendre scan,
//! simplex form and general (pseudoinverse) form.

pub mod general;
pub mod grid;
pub mod scan;
pub mod search;
pub mod signs;
pub mod simplex;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{column_span, nnls, pseudoinverse};
use crate::polytope::{DomainPolytope, Membership, MEMBERSHIP_TOL};
use crate::scalar::{lit, tol, Scalar};

pub use signs::PhaseMode;

/// How a functional value was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "t-scan")]
    TScan,
    #[serde(rename = "constrained-search")]
    ConstrainedSearch,
    #[serde(rename = "simplex-form")]
    SimplexForm,
    #[serde(rename = "general-form")]
    GeneralForm,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::TScan => "t-scan",
            Method::ConstrainedSearch => "constrained-search",
            Method::SimplexForm => "simplex-form",
            Method::GeneralForm => "general-form",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "t-scan" | "tscan" => Ok(Method::TScan),
            "constrained-search" | "search" => Ok(Method::ConstrainedSearch),
            "simplex-form" | "simplex" => Ok(Method::SimplexForm),
            "general-form" | "general" => Ok(Method::GeneralForm),
            other => Err(Error::InvalidArgument(format!("unknown method '{other}'"))),
        }
    }
}

/// One evaluation of the functional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSample<T> {
    pub n: Vec<T>,
    pub value: T,
    /// Tangent-plane gradient, when known.
    pub gradient: Option<Vec<T>>,
    /// Real coefficients over the full sector basis.
    pub minimizer: Option<Vec<T>>,
    pub method: Method,
    /// Set when the sample comes from a (near-)degenerate ground state.
    pub degenerate: bool,
}

/// A kernel vector of `T` and the weights `T^+ D(n) + x` it produces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelPoint<T> {
    pub x: Vec<T>,
    pub radicands: Vec<T>,
}

/// Options shared by the iterative evaluators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub seed: u64,
    pub starts: usize,
    pub max_outer: usize,
    /// Largest accepted constraint violation.
    pub tolerance: f64,
    pub phase: PhaseMode,
    /// Extra starting coefficient vectors (full sector basis).
    #[serde(default)]
    pub initial: Vec<Vec<f64>>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            seed: 0,
            starts: 32,
            max_outer: 40,
            tolerance: 1e-8,
            phase: PhaseMode::Real,
            initial: Vec::new(),
        }
    }
}

impl SearchOptions {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// `n = sum_alpha y_alpha n^(alpha)`.
pub fn occupations_from_weights<T: Scalar>(poly: &DomainPolytope<T>, y: &[T]) -> Vec<T> {
    let sector = poly.sector();
    let mut n = vec![T::zero(); sector.d()];
    for (a, s) in sector.states().iter().enumerate() {
        for (k, &x) in s.occ().iter().enumerate() {
            n[k] += y[a] * T::from_u32(x).expect("u32 fits");
        }
    }
    n
}

/// Sector states that may carry weight at `n`: all states for interior
/// points, the states of the active face for boundary points.
pub fn admissible_states<T: Scalar>(poly: &DomainPolytope<T>, n: &[T]) -> Result<(Vec<usize>, Membership)> {
    let m = poly.sector().dim();
    let membership = poly.membership(n);
    match &membership {
        Membership::Outside => Err(Error::InfeasibleTarget),
        Membership::Interior => Ok(((0..m).collect(), membership)),
        Membership::OnFacet(active) => {
            let eps = tol::<T>(MEMBERSHIP_TOL);
            let basis = (0..m)
                .filter(|&a| active.iter().all(|&j| poly.t()[(j, a)] <= eps))
                .collect();
            Ok((basis, membership))
        }
    }
}

/// Linear constraints `B y = r` (full row rank) expressing
/// `sum y = 1, sum y_alpha n^(alpha) = n` on the chosen basis states.
pub fn weight_constraints<T: Scalar>(poly: &DomainPolytope<T>, basis: &[usize], n: &[T]) -> (DMatrix<T>, DVector<T>) {
    let d = poly.sector().d();
    let m = basis.len();
    let mut a = DMatrix::<T>::zeros(d + 1, m);
    for (c, &alpha) in basis.iter().enumerate() {
        let occ = poly.sector().state(alpha).occ();
        for k in 0..d {
            a[(k, c)] = T::from_u32(occ[k]).expect("u32 fits") - n[k];
        }
        a[(d, c)] = T::one();
    }
    let mut rhs = DVector::<T>::zeros(d + 1);
    rhs[d] = T::one();
    let u = column_span(&a);
    let b = u.transpose() * &a;
    let r = u.transpose() * rhs;
    (b, r)
}

/// Generates feasible weight vectors `y >= 0, B y = r`.
pub(crate) struct WeightSampler<T: Scalar> {
    b_pinv: DMatrix<T>,
    b: DMatrix<T>,
    r: DVector<T>,
    center: DVector<T>,
}

impl<T: Scalar> WeightSampler<T> {
    /// Builds the sampler; the center is an average of basic feasible
    /// solutions under random column scalings, so it is strictly positive on
    /// every state that can carry weight.
    pub fn new(b: DMatrix<T>, r: DVector<T>, rng: &mut ChaCha8Rng) -> Result<Self> {
        let m = b.ncols();
        let (b_pinv, _) = pseudoinverse(&b);
        let rounds = (4 * m).max(8);
        let mut center = DVector::<T>::zeros(m);
        let scale = T::one() + r.amax();
        for round in 0..rounds {
            let s: Vec<T> = (0..m)
                .map(|_| if round == 0 { T::one() } else { lit(0.1 + rng.random::<f64>()) })
                .collect();
            let bs = DMatrix::from_fn(b.nrows(), m, |i, j| b[(i, j)] * s[j]);
            let z = nnls(&bs, &r);
            if (&bs * &z - &r).norm() > tol::<T>(1e-9) * scale {
                return Err(Error::InfeasibleTarget);
            }
            for j in 0..m {
                center[j] += z[j] * s[j];
            }
        }
        center /= T::from_usize(rounds).expect("fits");
        Ok(WeightSampler { b_pinv, b, r, center })
    }

    pub fn center(&self) -> &DVector<T> {
        &self.center
    }

    /// Projects `w` onto `B y = r`, then pulls it toward the center until nonnegative.
    pub fn feasible_from(&self, w: &DVector<T>) -> DVector<T> {
        let proj = w + &self.b_pinv * (&self.r - &self.b * w);
        let dir = &proj - &self.center;
        let mut t = T::one();
        for j in 0..proj.len() {
            if proj[j] < T::zero() && dir[j] < T::zero() {
                let tj = -self.center[j] / dir[j];
                if tj < t {
                    t = tj;
                }
            }
        }
        let t = if t < T::one() { t * lit(0.95) } else { t };
        let mut y = &self.center + dir * t;
        for v in y.iter_mut() {
            if *v < T::zero() {
                *v = T::zero();
            }
        }
        y
    }

    /// Dirichlet(1, ..., 1) proposal made feasible.
    pub fn random(&self, rng: &mut ChaCha8Rng) -> DVector<T> {
        let m = self.center.len();
        let e: Vec<f64> = (0..m).map(|_| Exp1.sample(rng)).collect();
        let total: f64 = e.iter().sum();
        let w = DVector::from_fn(m, |i, _| lit::<T>(e[i] / total));
        self.feasible_from(&w)
    }
}

pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Embeds restricted coefficients into the full sector basis.
pub(crate) fn embed<T: Scalar>(m: usize, basis: &[usize], c: &DVector<T>) -> Vec<T> {
    let mut full = vec![T::zero(); m];
    for (i, &a) in basis.iter().enumerate() {
        full[a] = c[i];
    }
    full
}

/// Submatrix of `w` on the chosen basis.
pub(crate) fn restrict<T: Scalar>(w: &DMatrix<T>, basis: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(basis.len(), basis.len(), |i, j| w[(basis[i], basis[j])])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::build_domain;
    use crate::sector::enumerate_sector;

    #[test]
    fn method_tags_roundtrip() {
        for m in [Method::TScan, Method::ConstrainedSearch, Method::SimplexForm, Method::GeneralForm] {
            assert_eq!(m.tag().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.tag()));
        }
    }

    #[test]
    fn sampler_weights_are_feasible() {
        let s = enumerate_sector(3, 6, 0).unwrap();
        let p: DomainPolytope<f64> = build_domain(&s).unwrap();
        let n = [2.5, 1.5, 2.0];
        let (basis, _) = admissible_states(&p, &n).unwrap();
        let (b, r) = weight_constraints(&p, &basis, &n);
        let mut rng = rng_for(1, 0);
        let sampler = WeightSampler::new(b, r, &mut rng).unwrap();
        assert!(sampler.center().iter().all(|&x| x > 1e-6));
        for _ in 0..20 {
            let y = sampler.random(&mut rng);
            assert!(y.iter().all(|&x| x >= 0.0));
            let got = occupations_from_weights(&p, y.as_slice());
            for k in 0..3 {
                assert!((got[k] - n[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn facet_points_restrict_the_basis() {
        let s = enumerate_sector(3, 6, 0).unwrap();
        let p: DomainPolytope<f64> = build_domain(&s).unwrap();
        let (basis, m) = admissible_states(&p, &[0.0, 3.0, 3.0]).unwrap();
        assert_eq!(m, Membership::OnFacet(vec![0]));
        for &a in &basis {
            assert_eq!(s.state(a).occ()[0], 0);
        }
        assert!(matches!(admissible_states(&p, &[7.0, -0.5, -0.5]), Err(Error::InfeasibleTarget)));
    }
}
