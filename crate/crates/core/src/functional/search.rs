//! Constrained search: minimize `c^T W c` over real `c` with `sum_alpha c_alpha^2 n^(alpha) = n`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;

use super::signs::minimize_signs;
use super::{
    admissible_states, embed, occupations_from_weights, restrict, rng_for, weight_constraints,
    FunctionalSample, Method, PhaseMode, SearchOptions, WeightSampler,
};
use crate::error::{Error, Result};
use crate::interaction::SectorOperator;
use crate::linalg::pseudoinverse;
use crate::polytope::DomainPolytope;
use crate::scalar::{lit, tol, to_f64, Scalar};

/// Minimizers found within this value window of the best are all kept.
pub const TIE_WINDOW: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct SearchResult<T: Scalar> {
    pub sample: FunctionalSample<T>,
    /// Distinct (up to global sign) minimizers with value within the tie window.
    pub minimizers: Vec<Vec<T>>,
    pub violation: T,
    pub converged_starts: usize,
}

struct Problem<T: Scalar> {
    w: DMatrix<T>,
    b: DMatrix<T>,
    r: DVector<T>,
    scale: T,
}

struct Local<T: Scalar> {
    c: DVector<T>,
    value: T,
    violation: T,
}

impl<T: Scalar> Problem<T> {
    fn residual(&self, c: &DVector<T>) -> DVector<T> {
        &self.b * c.component_mul(c) - &self.r
    }

    fn objective(&self, c: &DVector<T>) -> T {
        c.dot(&(&self.w * c))
    }

    fn lagrangian(&self, c: &DVector<T>, lam: &DVector<T>, rho: T) -> T {
        let g = self.residual(c);
        self.objective(c) - lam.dot(&g) + rho * g.norm_squared() / lit(2.0)
    }

    fn inner_newton(&self, mut c: DVector<T>, lam: &DVector<T>, rho: T, gtol: T) -> DVector<T> {
        let two: T = lit(2.0);
        for _ in 0..200 {
            let g = self.residual(&c);
            let mu = lam - &g * rho;
            let btm = self.b.transpose() * &mu;
            let grad = (&self.w * &c) * two - btm.component_mul(&c) * two;
            if grad.amax() <= gtol {
                break;
            }
            let j = &self.b * DMatrix::from_diagonal(&c);
            let h = &self.w * two - DMatrix::from_diagonal(&btm) * two + j.transpose() * &j * (rho * lit(4.0));
            let p = modified_newton_step(&h, &grad);
            let l0 = self.lagrangian(&c, lam, rho);
            let slope = grad.dot(&p);
            let mut alpha = T::one();
            let mut moved = false;
            for _ in 0..60 {
                let trial = &c + &p * alpha;
                if self.lagrangian(&trial, lam, rho) <= l0 + slope * alpha * lit(1e-4) {
                    c = trial;
                    moved = true;
                    break;
                }
                alpha /= two;
            }
            if !moved {
                break;
            }
        }
        c
    }

    fn augmented_lagrangian(&self, c0: DVector<T>, max_outer: usize) -> (DVector<T>, DVector<T>) {
        let mut c = c0;
        let mut lam = DVector::<T>::zeros(self.b.nrows());
        let mut rho = lit::<T>(10.0) * self.scale;
        let cap = lit::<T>(1e12) * self.scale;
        let mut prev = T::max_value().unwrap_or_else(|| lit(f64::MAX));
        for _ in 0..max_outer {
            // inexact inner solves: tighten with the violation, the polish finishes
            let gtol = (prev.min(lit(1e-2)) * lit(1e-2)).max(tol::<T>(1e-12)) * self.scale;
            c = self.inner_newton(c, &lam, rho, gtol);
            let g = self.residual(&c);
            let viol = g.amax();
            if viol <= tol::<T>(1e-13) {
                break;
            }
            lam -= &g * rho;
            // close to feasibility the KKT Newton iteration finishes much faster
            if viol <= tol::<T>(1e-3) {
                let (pc, pl) = self.polish(c.clone(), lam.clone());
                let ok = pc.iter().all(|x| x.is_finite())
                    && self.residual(&pc).amax() <= tol::<T>(1e-13)
                    // an infeasible iterate may undercut the optimum by about |lam| viol
                    && self.objective(&pc)
                        <= self.objective(&c) + lit::<T>(10.0) * (lam.amax() + self.scale) * viol + tol::<T>(1e-9) * self.scale;
                if ok {
                    return (pc, pl);
                }
            }
            // grow the penalty only when the violation stalls
            if viol > prev * lit(0.25) && rho < cap {
                rho *= lit(10.0);
            }
            prev = viol;
        }
        (c, lam)
    }

    /// Newton iteration on the KKT system for high accuracy.
    fn polish(&self, c: DVector<T>, lam: DVector<T>) -> (DVector<T>, DVector<T>) {
        let m = c.len();
        let q = lam.len();
        let two: T = lit(2.0);
        let (mut c, mut lam) = (c, lam);
        for _ in 0..30 {
            let btl = self.b.transpose() * &lam;
            let f1 = (&self.w * &c) * two - btl.component_mul(&c) * two;
            let f2 = self.residual(&c);
            if f1.amax().max(f2.amax()) <= tol::<T>(1e-14) * self.scale {
                break;
            }
            let mut jac = DMatrix::<T>::zeros(m + q, m + q);
            let h = &self.w * two - DMatrix::from_diagonal(&btl) * two;
            let g = &self.b * DMatrix::from_diagonal(&c) * two;
            jac.view_mut((0, 0), (m, m)).copy_from(&h);
            jac.view_mut((0, m), (m, q)).copy_from(&(-g.transpose()));
            jac.view_mut((m, 0), (q, m)).copy_from(&g);
            let mut rhs = DVector::<T>::zeros(m + q);
            rhs.rows_mut(0, m).copy_from(&(-f1));
            rhs.rows_mut(m, q).copy_from(&(-f2));
            let step = match jac.clone().lu().solve(&rhs) {
                Some(s) if s.iter().all(|x| x.is_finite()) => s,
                _ => pseudoinverse(&jac).0 * rhs,
            };
            c += step.rows(0, m);
            lam += step.rows(m, q);
        }
        (c, lam)
    }

    fn solve_from(&self, c0: DVector<T>, max_outer: usize) -> Local<T> {
        let (c, lam) = self.augmented_lagrangian(c0, max_outer);
        let base = Local {
            value: self.objective(&c),
            violation: self.residual(&c).amax(),
            c: c.clone(),
        };
        let (pc, _) = self.polish(c, lam);
        let polished = Local {
            value: self.objective(&pc),
            violation: self.residual(&pc).amax(),
            c: pc,
        };
        let value_ok = polished.value <= base.value + tol::<T>(1e-9) * self.scale;
        let all_finite = polished.c.iter().all(|x| x.is_finite());
        if all_finite && value_ok && polished.violation <= base.violation.max(tol::<T>(1e-13)) {
            polished
        } else {
            base
        }
    }
}

/// Newton direction with eigenvalues of the Hessian replaced by their
/// (floored) magnitudes, so it is always a descent direction.
pub(crate) fn modified_newton_step<T: Scalar>(h: &DMatrix<T>, grad: &DVector<T>) -> DVector<T> {
    let eig = SymmetricEigen::new(h.clone());
    let big = eig.eigenvalues.amax();
    let floor = tol::<T>(1e-8) * (T::one() + big);
    let proj = eig.eigenvectors.transpose() * grad;
    let scaled = DVector::from_fn(proj.len(), |i, _| -proj[i] / eig.eigenvalues[i].abs().max(floor));
    &eig.eigenvectors * scaled
}

/// Minimizes `c^T W c` over real coefficient vectors reproducing `n`.
pub fn constrained_search<T: Scalar>(
    poly: &DomainPolytope<T>,
    wmat: &SectorOperator<T>,
    n: &[T],
    opts: &SearchOptions,
) -> Result<SearchResult<T>> {
    if opts.phase != PhaseMode::Real {
        return Err(Error::InvalidArgument("constrained search runs over real coefficients".into()));
    }
    if wmat.dim() != poly.sector().dim() {
        return Err(Error::DimensionMismatch("operator and domain belong to different sectors".into()));
    }
    let (basis, _) = admissible_states(poly, n)?;
    let m_full = poly.sector().dim();
    let w = restrict(&wmat.matrix, &basis);
    let scale = T::one() + w.amax();
    if basis.len() == 1 {
        let c = DVector::from_element(1, T::one());
        let full = embed(m_full, &basis, &c);
        return Ok(SearchResult {
            sample: FunctionalSample {
                n: n.to_vec(),
                value: w[(0, 0)],
                gradient: None,
                minimizer: Some(full.clone()),
                method: Method::ConstrainedSearch,
                degenerate: false,
            },
            minimizers: vec![full],
            violation: T::zero(),
            converged_starts: 1,
        });
    }
    let (b, r) = weight_constraints(poly, &basis, n);
    let problem = Problem { w, b, r, scale };
    let mut master = rng_for(opts.seed, 0);
    let sampler = WeightSampler::new(problem.b.clone(), problem.r.clone(), &mut master)?;

    let mut starts: Vec<DVector<T>> = Vec::new();
    for init in &opts.initial {
        if init.len() == m_full {
            starts.push(DVector::from_fn(basis.len(), |i, _| lit(init[basis[i]])));
        }
    }
    let generated: Vec<DVector<T>> = (0..opts.starts.max(1))
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_for(opts.seed, 1 + k as u64);
            let y = if k == 0 { sampler.center().clone() } else { sampler.random(&mut rng) };
            let s: Vec<T> = y.iter().map(|&v| v.max(T::zero()).sqrt()).collect();
            let eta: Vec<T> = if k % 2 == 0 {
                minimize_signs(&problem.w, &s, opts.seed.wrapping_add(k as u64)).1
            } else {
                (0..s.len()).map(|_| if rng.random::<bool>() { T::one() } else { -T::one() }).collect()
            };
            DVector::from_fn(s.len(), |i, _| s[i] * eta[i])
        })
        .collect();
    starts.extend(generated);

    let locals: Vec<Local<T>> = starts
        .into_par_iter()
        .map(|c0| problem.solve_from(c0, opts.max_outer))
        .collect();

    let accept = tol::<T>(opts.tolerance);
    let feasible: Vec<&Local<T>> = locals.iter().filter(|l| l.violation <= accept && l.value.is_finite()).collect();
    if feasible.is_empty() {
        let best_violation = locals.iter().map(|l| to_f64(l.violation)).fold(f64::INFINITY, f64::min);
        return Err(Error::NonConvergence {
            starts: locals.len(),
            violation: best_violation,
        });
    }
    let best = feasible
        .iter()
        .min_by(|a, b| a.value.partial_cmp(&b.value).unwrap_or(std::cmp::Ordering::Equal))
        .expect("nonempty");
    let window = tol::<T>(TIE_WINDOW) * scale;
    let mut minimizers: Vec<Vec<T>> = Vec::new();
    let distinct = tol::<T>(1e-6);
    for l in &feasible {
        if l.value > best.value + window {
            continue;
        }
        let mut c = l.c.clone();
        normalize_sign(&mut c);
        let full = embed(m_full, &basis, &c);
        let dup = minimizers.iter().any(|other| {
            let diff = other.iter().zip(&full).fold(T::zero(), |a, (&x, &y)| a.max((x - y).abs()));
            diff <= distinct
        });
        if !dup {
            minimizers.push(full);
        }
    }
    let mut c = best.c.clone();
    normalize_sign(&mut c);
    let full = embed(m_full, &basis, &c);
    log::debug!(
        "constrained search: {} of {} starts feasible, {} minimizer(s)",
        feasible.len(),
        locals.len(),
        minimizers.len()
    );
    Ok(SearchResult {
        sample: FunctionalSample {
            n: n.to_vec(),
            value: best.value,
            gradient: None,
            minimizer: Some(full),
            method: Method::ConstrainedSearch,
            degenerate: false,
        },
        minimizers,
        violation: best.violation,
        converged_starts: feasible.len(),
    })
}

// global sign: largest-magnitude entry positive
fn normalize_sign<T: Scalar>(c: &mut DVector<T>) {
    let mut idx = 0;
    for i in 0..c.len() {
        if c[i].abs() > c[idx].abs() {
            idx = i;
        }
    }
    if c[idx] < T::zero() {
        c.neg_mut();
    }
}

/// Occupations reproduced by a coefficient vector.
pub fn occupations_of<T: Scalar>(poly: &DomainPolytope<T>, c: &[T]) -> Vec<T> {
    let y: Vec<T> = c.iter().map(|&x| x * x).collect();
    occupations_from_weights(poly, &y)
}
