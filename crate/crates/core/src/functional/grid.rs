//! Barycentric grids over the domain with per-point functional values and
//! finite-difference gradient magnitudes.

use std::collections::HashSet;

use rayon::prelude::*;

use super::general::general_form_functional;
use super::search::constrained_search;
use super::simplex::simplex_functional;
use super::{FunctionalSample, Method, SearchOptions};
use crate::error::{Error, Result};
use crate::interaction::SectorOperator;
use crate::io::{fmt_g17, CsvTable};
use crate::polytope::{DomainPolytope, Membership};
use crate::scalar::{lit, to_f64, Scalar};

/// Finite-difference step along tangent directions.
pub const FD_STEP: f64 = 1e-5;

#[derive(Clone, Debug)]
pub struct GridSample<T: Scalar> {
    pub index: usize,
    pub n: Vec<T>,
    pub on_facet: bool,
    pub sample: Option<FunctionalSample<T>>,
    /// `NaN` when no finite difference could be formed.
    pub grad_norm: f64,
    pub error: Option<String>,
}

/// Evaluates the functional at one point with the requested method.
pub fn evaluate<T: Scalar>(
    poly: &DomainPolytope<T>,
    wmat: &SectorOperator<T>,
    n: &[T],
    method: Method,
    opts: &SearchOptions,
) -> Result<FunctionalSample<T>> {
    match method {
        Method::ConstrainedSearch => constrained_search(poly, wmat, n, opts).map(|r| r.sample),
        Method::SimplexForm => simplex_functional(poly, wmat, n, opts.phase),
        Method::GeneralForm => general_form_functional(poly, wmat, n, opts).map(|r| r.sample),
        Method::TScan => Err(Error::InvalidArgument(
            "the t-scan samples kinetic vectors, not occupation points".into(),
        )),
    }
}

fn lattice(parts: usize, resolution: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, left: usize, slots: usize, out: &mut Vec<Vec<usize>>) {
        if slots == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for x in (0..=left).rev() {
            prefix.push(x);
            rec(prefix, left - x, slots - 1, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), resolution, parts, &mut out);
    out
}

/// Grid points: barycentric lattice over the vertex simplex, or over a fan
/// triangulation from the vertex centroid for polygons; the barycenter is
/// always included.
pub fn grid_points<T: Scalar>(poly: &DomainPolytope<T>, resolution: usize) -> Result<Vec<Vec<T>>> {
    let k = poly.affine_dim();
    if k > 2 {
        return Err(Error::InvalidArgument(format!("grids need affine dimension <= 2, got {k}")));
    }
    let resolution = resolution.max(1);
    let sector = poly.sector();
    let vertex = |v: usize| -> Vec<f64> { sector.state(v).to_f64() };
    let d = sector.d();
    let triangles: Vec<Vec<Vec<f64>>> = if poly.vertices().len() == k + 1 {
        vec![poly.vertices().iter().map(|&v| vertex(v)).collect()]
    } else {
        let cycle = poly.vertex_cycle().expect("two-dimensional hull");
        let nv = cycle.len() as f64;
        let centroid: Vec<f64> = (0..d).map(|i| cycle.iter().map(|&v| vertex(v)[i]).sum::<f64>() / nv).collect();
        (0..cycle.len())
            .map(|i| vec![centroid.clone(), vertex(cycle[i]), vertex(cycle[(i + 1) % cycle.len()])])
            .collect()
    };
    let mut seen = HashSet::new();
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut push = |p: Vec<f64>, out: &mut Vec<Vec<f64>>| {
        let key: Vec<i64> = p.iter().map(|x| (x * 1e9).round() as i64).collect();
        if seen.insert(key) {
            out.push(p);
        }
    };
    for tri in &triangles {
        for w in lattice(tri.len(), resolution) {
            let p: Vec<f64> = (0..d)
                .map(|i| tri.iter().zip(&w).map(|(v, &wi)| v[i] * wi as f64).sum::<f64>() / resolution as f64)
                .collect();
            push(p, &mut out);
        }
    }
    let nv = poly.vertices().len() as f64;
    let bary: Vec<f64> = (0..d)
        .map(|i| poly.vertices().iter().map(|&v| vertex(v)[i]).sum::<f64>() / nv)
        .collect();
    push(bary, &mut out);
    Ok(out.into_iter().map(|p| p.into_iter().map(lit).collect()).collect())
}

fn grad_norm<T: Scalar>(
    poly: &DomainPolytope<T>,
    wmat: &SectorOperator<T>,
    n: &[T],
    value: T,
    method: Method,
    opts: &SearchOptions,
) -> f64 {
    let basis = poly.tangent_basis();
    let h: T = lit(FD_STEP);
    let eval = |sign: T, dir: usize| -> Option<T> {
        let p: Vec<T> = (0..n.len()).map(|i| n[i] + sign * h * basis[(i, dir)]).collect();
        if !poly.membership(&p).is_inside() {
            return None;
        }
        evaluate(poly, wmat, &p, method, opts).ok().map(|s| s.value)
    };
    let mut sq = 0.0;
    for dir in 0..basis.ncols() {
        let fwd = eval(T::one(), dir);
        let bwd = eval(-T::one(), dir);
        let g = match (fwd, bwd) {
            (Some(f), Some(b)) => (f - b) / (h + h),
            (Some(f), None) => (f - value) / h,
            (None, Some(b)) => (value - b) / h,
            (None, None) => return f64::NAN,
        };
        sq += to_f64(g).powi(2);
    }
    sq.sqrt()
}

/// Evaluates the functional over a barycentric grid; results are ordered by grid index.
pub fn functional_grid<T: Scalar>(
    poly: &DomainPolytope<T>,
    wmat: &SectorOperator<T>,
    resolution: usize,
    method: Method,
    opts: &SearchOptions,
    with_gradient: bool,
) -> Result<Vec<GridSample<T>>> {
    let points = grid_points(poly, resolution)?;
    Ok(points
        .into_par_iter()
        .enumerate()
        .map(|(index, n)| {
            let on_facet = matches!(poly.membership(&n), Membership::OnFacet(_));
            match evaluate(poly, wmat, &n, method, opts) {
                Ok(s) => {
                    let g = if with_gradient { grad_norm(poly, wmat, &n, s.value, method, opts) } else { f64::NAN };
                    GridSample { index, n, on_facet, sample: Some(s), grad_norm: g, error: None }
                }
                Err(e) => GridSample { index, n, on_facet, sample: None, grad_norm: f64::NAN, error: Some(e.to_string()) },
            }
        })
        .collect())
}

/// Grid CSV: `n0..n{d-1}, F, grad_norm, method, degenerate_flag, on_facet, status`.
pub fn grid_csv<T: Scalar>(samples: &[GridSample<T>], d: usize, method: Method, meta: &[(&str, String)]) -> String {
    let mut header: Vec<String> = (0..d).map(|k| format!("n{k}")).collect();
    for h in ["F", "grad_norm", "method", "degenerate_flag", "on_facet", "status"] {
        header.push(h.into());
    }
    let mut table = CsvTable::new(&header);
    for (k, v) in meta {
        table.meta(k, v);
    }
    for s in samples {
        let mut row: Vec<String> = s.n.iter().map(|&x| fmt_g17(to_f64(x))).collect();
        let (value, degenerate) = match &s.sample {
            Some(f) => (to_f64(f.value), f.degenerate),
            None => (f64::NAN, true),
        };
        row.push(fmt_g17(value));
        row.push(fmt_g17(s.grad_norm));
        row.push(method.tag().into());
        row.push(u8::from(degenerate).to_string());
        row.push(u8::from(s.on_facet).to_string());
        row.push(s.error.clone().map_or_else(|| "ok".into(), |e| e.replace(',', ";")));
        table.push_row(row);
    }
    table.render()
}
