//! Repulsion strength of the generalized BEC force at facet points, and
//! finite-difference checks of the `sqrt(eps)` law along facet normals.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::search::constrained_search;
use crate::functional::signs::minimize_signs;
use crate::functional::simplex::simplex_weights;
use crate::functional::{weight_constraints, SearchOptions};
use crate::interaction::SectorOperator;
use crate::io::{fmt_g17, CsvTable};
use crate::linalg::pseudoinverse;
use crate::polytope::{DomainPolytope, MEMBERSHIP_TOL};
use crate::scalar::{lit, to_f64, tol, Scalar};

/// Largest admissible `D_s(n*)`.
pub const ON_FACET_TOL: f64 = 1e-10;
/// Smallest admissible distance to every other facet (ridge exclusion).
pub const RIDGE_TOL: f64 = 1e-6;
/// Above this many decoupled blocks only the minimizer as found is evaluated.
const MAX_FLIP_BLOCKS: usize = 12;

/// A point on exactly one facet.
#[derive(Clone, Debug, PartialEq)]
pub struct FacetPoint<T> {
    pub facet: usize,
    pub n_star: Vec<T>,
    /// `D_j(n*)` for every facet, including `s` itself.
    pub distances: Vec<T>,
}

impl<T: Scalar> FacetPoint<T> {
    pub fn new(poly: &DomainPolytope<T>, facet: usize, n_star: Vec<T>) -> Result<Self> {
        if facet >= poly.num_facets() {
            return Err(Error::InvalidFacetPoint(format!("facet {facet} out of range ({} facets)", poly.num_facets())));
        }
        let distances = poly.facet_distances(&n_star)?;
        if distances[facet].abs() > tol::<T>(ON_FACET_TOL) {
            return Err(Error::InvalidFacetPoint(format!(
                "D_{facet}(n*) = {:e} is not zero",
                to_f64(distances[facet])
            )));
        }
        for (j, &dj) in distances.iter().enumerate() {
            if j != facet && dj <= tol::<T>(RIDGE_TOL) {
                return Err(Error::InvalidFacetPoint(format!(
                    "n* lies within {RIDGE_TOL:e} of facet {j} (ridge points are not supported)"
                )));
            }
        }
        Ok(FacetPoint { facet, n_star, distances })
    }

    /// Locates the unique facet through `n_star`.
    pub fn locate(poly: &DomainPolytope<T>, n_star: Vec<T>) -> Result<Self> {
        let distances = poly.facet_distances(&n_star)?;
        let active: Vec<usize> = (0..distances.len())
            .filter(|&j| distances[j].abs() <= tol::<T>(ON_FACET_TOL))
            .collect();
        match active.as_slice() {
            [s] => Self::new(poly, *s, n_star),
            [] => Err(Error::InvalidFacetPoint("n* lies on no facet".into())),
            _ => Err(Error::InvalidFacetPoint(format!("n* lies on facets {active:?}"))),
        }
    }

    /// `n* + eps kappa_s`.
    pub fn along_normal(&self, poly: &DomainPolytope<T>, eps: T) -> Vec<T> {
        let kappa = &poly.facets()[self.facet].kappa;
        self.n_star.iter().zip(kappa).map(|(&x, &k)| x + eps * k).collect()
    }
}

/// One off-facet state's contribution to the radicand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForceTerm<T> {
    pub state: usize,
    /// `|<n^(a)|W|Phi*>|^2`
    pub coupling_sq: T,
    /// `D_s(n^(a))`
    pub distance: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForceResult<T> {
    pub g: T,
    pub minimizer_used: Vec<T>,
    pub contributing_terms: Vec<ForceTerm<T>>,
    /// Number of on-facet minimizers (including sign variants) evaluated.
    pub candidates: usize,
}

/// States with `D_s(n^(a)) <= MEMBERSHIP_TOL`.
pub fn facet_states<T: Scalar>(poly: &DomainPolytope<T>, facet: usize) -> Vec<usize> {
    let eps = tol::<T>(MEMBERSHIP_TOL);
    (0..poly.sector().dim()).filter(|&a| poly.distance(facet, a) <= eps).collect()
}

// Re-solves the weights on the support exactly when they are determined by it.
fn polish_support<T: Scalar>(poly: &DomainPolytope<T>, n: &[T], c: &[T]) -> Vec<T> {
    let support: Vec<usize> = (0..c.len()).filter(|&a| c[a] * c[a] > tol::<T>(1e-9)).collect();
    let (b, r) = weight_constraints(poly, &support, n);
    let (pinv, rank) = pseudoinverse(&b);
    if rank < support.len() {
        return c.to_vec();
    }
    let y: DVector<T> = &pinv * &r;
    if y.iter().any(|&v| v < T::zero()) || (&b * &y - &r).amax() > tol::<T>(1e-10) {
        return c.to_vec();
    }
    let mut out = vec![T::zero(); c.len()];
    for (i, &a) in support.iter().enumerate() {
        out[a] = y[i].sqrt() * c[a].signum();
    }
    out
}

// Splits the support into blocks not coupled by W; flipping a whole block
// leaves the on-facet value unchanged, so every flip is also a minimizer.
fn sign_variants<T: Scalar>(wmat: &SectorOperator<T>, c: &[T]) -> Vec<Vec<T>> {
    let support: Vec<usize> = (0..c.len()).filter(|&a| c[a] != T::zero()).collect();
    let w = &wmat.matrix;
    let cut = tol::<T>(1e-14) * (T::one() + w.amax());
    let mut block = vec![usize::MAX; support.len()];
    let mut blocks = 0;
    for start in 0..support.len() {
        if block[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        block[start] = blocks;
        while let Some(i) = stack.pop() {
            for j in 0..support.len() {
                if block[j] == usize::MAX && w[(support[i], support[j])].abs() > cut {
                    block[j] = blocks;
                    stack.push(j);
                }
            }
        }
        blocks += 1;
    }
    if blocks <= 1 || blocks > MAX_FLIP_BLOCKS {
        return vec![c.to_vec()];
    }
    // block 0 keeps its sign (global phase)
    (0..1usize << (blocks - 1))
        .map(|mask| {
            let mut v = c.to_vec();
            for (i, &a) in support.iter().enumerate() {
                if block[i] > 0 && mask >> (block[i] - 1) & 1 == 1 {
                    v[a] = -v[a];
                }
            }
            v
        })
        .collect()
}

/// All value-degenerate minimizers of the constrained search at `n*`,
/// restricted to the facet's states (sign variants of decoupled blocks included).
pub fn facet_minimizer<T: Scalar>(
    poly: &DomainPolytope<T>,
    wmat: &SectorOperator<T>,
    fp: &FacetPoint<T>,
    opts: &SearchOptions,
) -> Result<Vec<Vec<T>>> {
    let states = facet_states(poly, fp.facet);
    if states.is_empty() {
        return Err(Error::EmptyFacetBasis(fp.facet));
    }
    // the search restricts to face states on its own for on-facet targets
    let res = constrained_search(poly, wmat, &fp.n_star, opts)?;
    let mut out: Vec<Vec<T>> = Vec::new();
    for c in &res.minimizers {
        let c = polish_support(poly, &fp.n_star, c);
        debug_assert!((0..c.len()).all(|a| c[a] == T::zero() || states.contains(&a)));
        for mut v in sign_variants(wmat, &c) {
            if let Some(a) = v.iter().position(|&x| x != T::zero()) {
                if v[a] < T::zero() {
                    v.iter_mut().for_each(|x| *x = -*x);
                }
            }
            if !out.contains(&v) {
                out.push(v);
            }
        }
    }
    Ok(out)
}

fn evaluate_force<T: Scalar>(poly: &DomainPolytope<T>, wmat: &SectorOperator<T>, facet: usize, c: &[T]) -> (T, Vec<ForceTerm<T>>) {
    let eps = tol::<T>(MEMBERSHIP_TOL);
    let m = c.len();
    let mut terms = Vec::new();
    let mut radicand = T::zero();
    for a in 0..m {
        let dist = poly.distance(facet, a);
        if dist <= eps {
            continue;
        }
        let amp = (0..m).fold(T::zero(), |acc, b| acc + wmat.matrix[(a, b)] * c[b]);
        let coupling_sq = amp * amp;
        radicand += coupling_sq / dist;
        terms.push(ForceTerm { state: a, coupling_sq, distance: dist });
    }
    (-lit::<T>(2.0) * radicand.sqrt(), terms)
}

fn strongest<T: Scalar>(
    poly: &DomainPolytope<T>,
    wmat: &SectorOperator<T>,
    facet: usize,
    candidates: Vec<Vec<T>>,
) -> ForceResult<T> {
    let count = candidates.len();
    let mut best: Option<ForceResult<T>> = None;
    for c in candidates {
        let (g, terms) = evaluate_force(poly, wmat, facet, &c);
        // ties: the most negative slope is the one realized along the path
        if best.as_ref().is_none_or(|b| g < b.g) {
            best = Some(ForceResult { g, minimizer_used: c, contributing_terms: terms, candidates: count });
        }
    }
    best.expect("at least one candidate")
}

/// `G = -2 [sum_{a off facet} |<n^(a)|W|Phi*>|^2 / D_s(n^(a))]^(1/2)`.
pub fn repulsion_strength<T: Scalar>(
    poly: &DomainPolytope<T>,
    wmat: &SectorOperator<T>,
    fp: &FacetPoint<T>,
    opts: &SearchOptions,
) -> Result<ForceResult<T>> {
    let candidates = facet_minimizer(poly, wmat, fp, opts)?;
    Ok(strongest(poly, wmat, fp.facet, candidates))
}

/// Simplex-setting form `G = -2 |<n^(w)|W|Phi*>| / sqrt(L_w)` with `Phi*`
/// built from the closed-form weights at `n*`.
pub fn simplex_repulsion<T: Scalar>(poly: &DomainPolytope<T>, wmat: &SectorOperator<T>, fp: &FacetPoint<T>) -> Result<ForceResult<T>> {
    let y = simplex_weights(poly, &fp.n_star)?;
    let mut s: Vec<T> = y.iter().map(|&v| v.sqrt()).collect();
    s[fp.facet] = T::zero();
    let (_, eta) = minimize_signs(&wmat.matrix, &s, 0);
    let c: Vec<T> = s.iter().zip(&eta).map(|(&a, &b)| a * b).collect();
    let omega = fp.facet;
    let mut best = strongest(poly, wmat, omega, sign_variants(wmat, &c));
    let amp = (0..c.len()).fold(T::zero(), |acc, b| acc + wmat.matrix[(omega, b)] * best.minimizer_used[b]);
    best.g = -lit::<T>(2.0) * amp.abs() / poly.distance(omega, omega).sqrt();
    Ok(best)
}

/// Log-spaced ladder of `count` values in `[lo, hi]`.
pub fn eps_ladder(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![hi];
    }
    (0..count)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlopeFit<T> {
    pub g_fit: T,
    /// Coefficient of the `eps` correction term.
    pub linear: T,
    /// Weighted RMS residual of the fit.
    pub residual: T,
    pub f_star: T,
    /// `(sqrt(eps), F)` pairs in ladder order.
    pub samples: Vec<(T, T)>,
}

/// Fits `F[n* + eps kappa_s] - F[n*] = G sqrt(eps) + b eps` with weights `1/eps`.
pub fn verify_slope<T: Scalar>(
    poly: &DomainPolytope<T>,
    wmat: &SectorOperator<T>,
    fp: &FacetPoint<T>,
    eps_list: &[f64],
    opts: &SearchOptions,
) -> Result<SlopeFit<T>> {
    if eps_list.len() < 2 || eps_list.iter().any(|&e| e.is_nan() || e <= 0.0) {
        return Err(Error::InvalidArgument("need at least two positive eps values".into()));
    }
    for &e in eps_list {
        if !poly.membership(&fp.along_normal(poly, lit(e))).is_inside() {
            return Err(Error::PathExitsDomain(e));
        }
    }
    let f_star = constrained_search(poly, wmat, &fp.n_star, opts)?.sample.value;
    let values: Vec<T> = eps_list
        .par_iter()
        .map(|&e| constrained_search(poly, wmat, &fp.along_normal(poly, lit(e)), opts).map(|r| r.sample.value))
        .collect::<Result<_>>()?;
    // normal equations in (sqrt eps, eps) with weights 1/eps
    let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let df: Vec<f64> = values.iter().map(|&v| to_f64(v - f_star)).collect();
    for (&e, &y) in eps_list.iter().zip(&df) {
        let w = 1.0 / e;
        let (a, b) = (e.sqrt(), e);
        s11 += w * a * a;
        s12 += w * a * b;
        s22 += w * b * b;
        r1 += w * a * y;
        r2 += w * b * y;
    }
    let det = s11 * s22 - s12 * s12;
    let g = (r1 * s22 - r2 * s12) / det;
    let lin = (s11 * r2 - s12 * r1) / det;
    let wss: f64 = eps_list
        .iter()
        .zip(&df)
        .map(|(&e, &y)| (y - g * e.sqrt() - lin * e).powi(2) / e)
        .sum();
    let residual = (wss / eps_list.len() as f64).sqrt();
    Ok(SlopeFit {
        g_fit: lit(g),
        linear: lit(lin),
        residual: lit(residual),
        f_star,
        samples: eps_list.iter().zip(values).map(|(&e, v)| (lit(e.sqrt()), v)).collect(),
    })
}

/// First-order check of the coefficient ansatz near a facet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientDiagnostic {
    pub eps: f64,
    /// `sum_{a off facet} r_a^2 D_s(n^(a))` with `r_a = c_a / sqrt(eps)`; should be 1.
    pub constraint_sum: f64,
    /// `max | |c_a(eps)| - |p_a| | / eps` over on-facet states with `p_a != 0`.
    pub on_facet_drift: f64,
    /// On-facet states with `p_a = 0` whose coefficient grew like `sqrt(eps)`.
    pub sqrt_scaling: Vec<usize>,
}

pub fn appendix_coefficient_check<T: Scalar>(
    poly: &DomainPolytope<T>,
    wmat: &SectorOperator<T>,
    fp: &FacetPoint<T>,
    eps: f64,
    opts: &SearchOptions,
) -> Result<CoefficientDiagnostic> {
    let force = repulsion_strength(poly, wmat, fp, opts)?;
    let n = fp.along_normal(poly, lit(eps));
    if !poly.membership(&n).is_inside() {
        return Err(Error::PathExitsDomain(eps));
    }
    let res = constrained_search(poly, wmat, &n, opts)?;
    let c = res.sample.minimizer.expect("search returns a minimizer");
    let on = facet_states(poly, fp.facet);
    let mut constraint_sum = 0.0;
    let mut drift: f64 = 0.0;
    let mut sqrt_scaling = Vec::new();
    for (a, &ca) in c.iter().enumerate() {
        let ca = to_f64(ca);
        if on.contains(&a) {
            let pa = to_f64(force.minimizer_used[a]).abs();
            if pa > 1e-6 {
                drift = drift.max((ca.abs() - pa).abs() / eps);
            } else if ca.abs() > 0.1 * eps.sqrt() {
                sqrt_scaling.push(a);
            }
        } else {
            constraint_sum += ca * ca / eps * to_f64(poly.distance(fp.facet, a));
        }
    }
    Ok(CoefficientDiagnostic { eps, constraint_sum, on_facet_drift: drift, sqrt_scaling })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ForceReport {
    pub d: usize,
    #[serde(rename = "N")]
    pub n_particles: u32,
    #[serde(rename = "P")]
    pub momentum: usize,
    pub facet: usize,
    pub kappa: Vec<f64>,
    pub n_star: Vec<f64>,
    #[serde(rename = "G")]
    pub g: f64,
    pub minimizer_used: Vec<f64>,
    pub contributing_terms: Vec<ForceTerm<f64>>,
    pub g_fit: Option<f64>,
    pub residual: Option<f64>,
    pub relative_deviation: Option<f64>,
    pub eps: Vec<f64>,
}

impl ForceReport {
    pub fn new<T: Scalar>(poly: &DomainPolytope<T>, fp: &FacetPoint<T>, force: &ForceResult<T>, fit: Option<&SlopeFit<T>>, eps: &[f64]) -> Self {
        let s = poly.sector();
        let g = to_f64(force.g);
        ForceReport {
            d: s.d(),
            n_particles: s.particles(),
            momentum: s.momentum(),
            facet: fp.facet,
            kappa: poly.facets()[fp.facet].kappa.iter().map(|&x| to_f64(x)).collect(),
            n_star: fp.n_star.iter().map(|&x| to_f64(x)).collect(),
            g,
            minimizer_used: force.minimizer_used.iter().map(|&x| to_f64(x)).collect(),
            contributing_terms: force
                .contributing_terms
                .iter()
                .map(|t| ForceTerm { state: t.state, coupling_sq: to_f64(t.coupling_sq), distance: to_f64(t.distance) })
                .collect(),
            g_fit: fit.map(|f| to_f64(f.g_fit)),
            residual: fit.map(|f| to_f64(f.residual)),
            relative_deviation: fit.map(|f| ((to_f64(f.g_fit) - g) / g).abs()),
            eps: eps.to_vec(),
        }
    }
}

/// CSV of `(sqrt_eps, F)` along the normal path; the first row is `eps = 0`.
pub fn slope_csv<T: Scalar>(fit: &SlopeFit<T>, g: T, meta: &[(&str, String)]) -> String {
    let mut table = CsvTable::new(&["sqrt_eps", "F", "F_linear"]);
    for (k, v) in meta {
        table.meta(k, v);
    }
    let f0 = to_f64(fit.f_star);
    table.push_row(vec![fmt_g17(0.0), fmt_g17(f0), fmt_g17(f0)]);
    for &(se, f) in &fit.samples {
        let se = to_f64(se);
        table.push_floats(&[se, to_f64(f), f0 + to_f64(g) * se]);
    }
    table.render()
}
