//! The functional domain: convex hull of a sector's occupation vectors, its
//! facet constraints and the incidence-distance matrix `T`.

pub mod exact;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_g17, CsvTable};
use crate::linalg::{column_span, nnls, null_space, pseudoinverse, RANK_CUTOFF};
use crate::scalar::{from_usize, lit, tol, to_f64, Scalar};
use crate::sector::Sector;
use exact::IntFacet;

/// Tolerance on facet distances for membership decisions.
pub const MEMBERSHIP_TOL: f64 = 1e-9;
/// Largest supported site count (affine dimension of the hull at most 4).
pub const MAX_SITES: usize = 5;

const TANGENT_CONVENTION: &str =
    "kappa in the direction space of the hull's affine span, unit Euclidean norm";

/// `D(n) = kappa . n + mu >= 0` with `kappa` tangent and unit-norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FacetConstraint<T> {
    pub kappa: Vec<T>,
    pub mu: T,
}

impl<T: Scalar> FacetConstraint<T> {
    pub fn eval(&self, n: &[T]) -> T {
        self.kappa.iter().zip(n).fold(self.mu, |acc, (&k, &x)| acc + k * x)
    }
}

/// Projects a raw constraint onto the hyperplane `sum n = N` and rescales it to unit norm.
pub fn normalize_constraint<T: Scalar>(kappa_raw: &[T], mu_raw: T, n_particles: u32) -> Result<FacetConstraint<T>> {
    let d = kappa_raw.len();
    if d == 0 {
        return Err(Error::DegenerateConstraint);
    }
    let nu = -kappa_raw.iter().fold(T::zero(), |a, &b| a + b) / from_usize::<T>(d);
    let kappa: Vec<T> = kappa_raw.iter().map(|&k| k + nu).collect();
    let mu = mu_raw - nu * T::from_u32(n_particles).expect("u32 fits");
    let norm = kappa.iter().fold(T::zero(), |a, &b| a + b * b).sqrt();
    let scale = kappa_raw.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
    if norm <= tol::<T>(1e-12) * scale.max(T::one()) {
        return Err(Error::DegenerateConstraint);
    }
    Ok(FacetConstraint {
        kappa: kappa.iter().map(|&k| k / norm).collect(),
        mu: mu / norm,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointClass {
    Vertex,
    Boundary,
    Interior,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Membership {
    Interior,
    OnFacet(Vec<usize>),
    Outside,
}

impl Membership {
    pub fn is_inside(&self) -> bool {
        !matches!(self, Membership::Outside)
    }
}

/// Convex hull of the occupation vectors of a sector.
#[derive(Clone, Debug)]
pub struct DomainPolytope<T: Scalar> {
    sector: Sector,
    affine_dim: usize,
    vertices: Vec<usize>,
    classes: Vec<PointClass>,
    facets: Vec<FacetConstraint<T>>,
    raw_facets: Vec<IntFacet>,
    t: DMatrix<T>,
    t_pinv: DMatrix<T>,
    kernel: DMatrix<T>,
    rank: usize,
    tangent: DMatrix<T>,
}

fn int_points(sector: &Sector) -> Vec<Vec<i64>> {
    sector
        .states()
        .iter()
        .map(|s| s.occ().iter().map(|&x| i64::from(x)).collect())
        .collect()
}

/// Indices of points that are not (numerically) convex combinations of the others.
fn vertex_candidates(points: &[Vec<i64>]) -> Vec<usize> {
    let m = points.len();
    if m <= 3 {
        return (0..m).collect();
    }
    let d = points[0].len();
    let scale = points.iter().flatten().map(|x| x.abs()).max().unwrap_or(1).max(1) as f64;
    (0..m)
        .filter(|&i| {
            let others: Vec<usize> = (0..m).filter(|&j| j != i).collect();
            let mut a = DMatrix::<f64>::zeros(d + 1, others.len());
            for (c, &j) in others.iter().enumerate() {
                for r in 0..d {
                    a[(r, c)] = points[j][r] as f64;
                }
                a[(d, c)] = scale;
            }
            let mut b = DVector::<f64>::zeros(d + 1);
            for r in 0..d {
                b[r] = points[i][r] as f64;
            }
            b[d] = scale;
            let x = nnls(&a, &b);
            (&a * x - b).norm() > 1e-7 * scale
        })
        .collect()
}

fn rational_rank(vectors: &[Vec<i64>]) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let d = vectors[0].len();
    let shifted: Vec<Vec<i64>> = std::iter::once(vec![0; d]).chain(vectors.iter().cloned()).collect();
    exact::affine_hull(&shifted).0
}

fn to_matrix<T: Scalar>(rows: &[Vec<f64>], ncols: usize) -> DMatrix<T> {
    DMatrix::from_fn(rows.len(), ncols, |i, j| lit(rows[i][j]))
}

impl<T: Scalar> DomainPolytope<T> {
    pub fn sector(&self) -> &Sector {
        &self.sector
    }

    pub fn affine_dim(&self) -> usize {
        self.affine_dim
    }

    /// Sector indices of the extreme points.
    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn classes(&self) -> &[PointClass] {
        &self.classes
    }

    pub fn facets(&self) -> &[FacetConstraint<T>] {
        &self.facets
    }

    pub fn num_facets(&self) -> usize {
        self.facets.len()
    }

    /// Facets in the sparsest-integer convention (e.g. `n_0 >= 0`).
    pub fn raw_facets(&self) -> &[IntFacet] {
        &self.raw_facets
    }

    /// True for single-state sectors (affine dimension 0, no facets).
    pub fn is_degenerate(&self) -> bool {
        self.affine_dim == 0
    }

    pub fn t(&self) -> &DMatrix<T> {
        &self.t
    }

    pub fn t_pinv(&self) -> &DMatrix<T> {
        &self.t_pinv
    }

    /// Orthonormal basis of `ker T` as columns.
    pub fn kernel(&self) -> &DMatrix<T> {
        &self.kernel
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Orthonormal basis (columns) of the direction space of the affine hull.
    pub fn tangent_basis(&self) -> &DMatrix<T> {
        &self.tangent
    }

    /// `L_alpha`-style distances `T[j][alpha]`.
    pub fn distance(&self, facet: usize, state: usize) -> T {
        self.t[(facet, state)]
    }

    /// Sector indices of the states lying on facet `j`.
    pub fn on_facet_states(&self, j: usize) -> Vec<usize> {
        (0..self.sector.dim())
            .filter(|&a| self.t[(j, a)].abs() <= tol::<T>(MEMBERSHIP_TOL))
            .collect()
    }

    /// `(T, T^+, kernel)` in the raw integer facet convention.
    pub fn raw_incidence(&self) -> (DMatrix<T>, DMatrix<T>, DMatrix<T>) {
        let states = self.sector.states();
        let t = DMatrix::from_fn(self.raw_facets.len(), states.len(), |j, a| {
            let p: Vec<i64> = states[a].occ().iter().map(|&x| i64::from(x)).collect();
            lit(self.raw_facets[j].eval(&p) as f64)
        });
        let (p, _) = pseudoinverse(&t);
        let k = null_space(&t);
        (t, p, k)
    }

    fn check_hyperplane(&self, n: &[T]) -> Result<()> {
        if n.len() != self.sector.d() {
            return Err(Error::DimensionMismatch(format!(
                "occupation vector has {} entries, expected {}",
                n.len(),
                self.sector.d()
            )));
        }
        let total = n.iter().fold(T::zero(), |a, &b| a + b);
        let want = T::from_u32(self.sector.particles()).expect("u32 fits");
        if (total - want).abs() > tol::<T>(MEMBERSHIP_TOL) * want.max(T::one()) {
            return Err(Error::OffHyperplane {
                expected: to_f64(want),
                got: to_f64(total),
            });
        }
        Ok(())
    }

    /// `D_j(n)` for every facet.
    pub fn facet_distances(&self, n: &[T]) -> Result<Vec<T>> {
        self.check_hyperplane(n)?;
        Ok(self.facets.iter().map(|f| f.eval(n)).collect())
    }

    /// Distance of `n` from the affine hull of the domain.
    pub fn hull_residual(&self, n: &[T]) -> T {
        let anchor = self.sector.state(0).occ();
        let v = DVector::from_fn(n.len(), |i, _| n[i] - T::from_u32(anchor[i]).expect("u32 fits"));
        let proj = &self.tangent * (self.tangent.transpose() * &v);
        (v - proj).norm()
    }

    pub fn membership(&self, n: &[T]) -> Membership {
        if self.check_hyperplane(n).is_err() {
            return Membership::Outside;
        }
        let scale = T::from_u32(self.sector.particles()).expect("u32 fits").max(T::one());
        let eps = tol::<T>(MEMBERSHIP_TOL);
        if self.hull_residual(n) > eps * scale {
            return Membership::Outside;
        }
        let mut active = Vec::new();
        for (j, f) in self.facets.iter().enumerate() {
            let dj = f.eval(n);
            if dj < -eps {
                return Membership::Outside;
            }
            if dj <= eps {
                active.push(j);
            }
        }
        if active.is_empty() {
            Membership::Interior
        } else {
            Membership::OnFacet(active)
        }
    }

    /// Every occupation vector is a vertex and vertices pair with facets one-to-one.
    pub fn is_simplex_setting(&self) -> bool {
        let m = self.sector.dim();
        self.vertices.len() == m && self.facets.len() == m && m == self.affine_dim + 1
    }

    /// Vertex indices in cyclic order around the centroid (2-dimensional hulls only).
    pub fn vertex_cycle(&self) -> Option<Vec<usize>> {
        if self.affine_dim != 2 {
            return None;
        }
        let coords: Vec<(f64, f64)> = self
            .vertices
            .iter()
            .map(|&v| {
                let p = DVector::from_fn(self.sector.d(), |i, _| {
                    T::from_u32(self.sector.state(v).occ()[i]).expect("u32 fits")
                });
                let c = self.tangent.transpose() * p;
                (to_f64(c[0]), to_f64(c[1]))
            })
            .collect();
        let k = coords.len() as f64;
        let cx = coords.iter().map(|c| c.0).sum::<f64>() / k;
        let cy = coords.iter().map(|c| c.1).sum::<f64>() / k;
        let mut order: Vec<usize> = (0..coords.len()).collect();
        order.sort_by(|&a, &b| {
            let ta = (coords[a].1 - cy).atan2(coords[a].0 - cx);
            let tb = (coords[b].1 - cy).atan2(coords[b].0 - cx);
            ta.partial_cmp(&tb).unwrap_or(std::cmp::Ordering::Equal)
        });
        Some(order.into_iter().map(|i| self.vertices[i]).collect())
    }

    /// CSV of facet distances at every lattice point of the sector.
    pub fn distances_csv(&self) -> String {
        let d = self.sector.d();
        let mut header: Vec<String> = (0..d).map(|k| format!("n{k}")).collect();
        header.push("class".into());
        header.extend((0..self.facets.len()).map(|j| format!("D{j}")));
        let mut table = CsvTable::new(&header);
        table
            .meta("d", d)
            .meta("N", self.sector.particles())
            .meta("P", self.sector.momentum())
            .meta("facet_convention", TANGENT_CONVENTION);
        for (a, s) in self.sector.states().iter().enumerate() {
            let mut row: Vec<String> = s.occ().iter().map(|x| x.to_string()).collect();
            row.push(
                match self.classes[a] {
                    PointClass::Vertex => "vertex",
                    PointClass::Boundary => "boundary",
                    PointClass::Interior => "interior",
                }
                .into(),
            );
            row.extend((0..self.facets.len()).map(|j| fmt_g17(to_f64(self.t[(j, a)]))));
            table.push_row(row);
        }
        table.render()
    }
}

/// Builds the domain of a sector with exact facet enumeration.
pub fn build_domain<T: Scalar>(sector: &Sector) -> Result<DomainPolytope<T>> {
    let d = sector.d();
    if d > MAX_SITES {
        return Err(Error::UnsupportedDomain(format!(
            "d = {d} exceeds the supported maximum of {MAX_SITES} sites"
        )));
    }
    let points = int_points(sector);
    let m = points.len();
    let (k, basis) = exact::affine_hull(&points);

    let tangent_cols: Vec<Vec<f64>> = basis.iter().map(|b| b.iter().map(|&x| x as f64).collect()).collect();
    let tangent = if k == 0 {
        DMatrix::<T>::zeros(d, 0)
    } else {
        column_span(&to_matrix::<T>(&tangent_cols, d).transpose())
    };

    if k == 0 {
        return Ok(DomainPolytope {
            sector: sector.clone(),
            affine_dim: 0,
            vertices: vec![0],
            classes: vec![PointClass::Vertex; m],
            facets: Vec::new(),
            raw_facets: Vec::new(),
            t: DMatrix::zeros(0, m),
            t_pinv: DMatrix::zeros(m, 0),
            kernel: DMatrix::identity(m, m),
            rank: 0,
            tangent,
        });
    }

    let complement = exact::orthogonal_complement(&basis, d);
    let mut cand_idx = vertex_candidates(&points);
    let int_facets = loop {
        let cand: Vec<Vec<i64>> = cand_idx.iter().map(|&i| points[i].clone()).collect();
        let facets = exact::enumerate_facets(&cand, k, &complement, d);
        let missed: Vec<usize> = (0..m)
            .filter(|i| !cand_idx.contains(i))
            .filter(|&i| !exact::inside(&facets, &complement, &points[0], &points[i]))
            .collect();
        if missed.is_empty() {
            break facets;
        }
        log::debug!("vertex prefilter missed {} points; retrying", missed.len());
        cand_idx.extend(missed);
        cand_idx.sort_unstable();
    };

    // order facets by the sorted list of states they do not contain
    let mut keyed: Vec<(Vec<usize>, IntFacet)> = int_facets
        .into_iter()
        .map(|f| {
            let off: Vec<usize> = (0..m).filter(|&a| f.eval(&points[a]) != 0).collect();
            (off, f)
        })
        .collect();
    keyed.sort();
    let int_facets: Vec<IntFacet> = keyed.into_iter().map(|(_, f)| f).collect();

    let mut vertices = Vec::new();
    let mut classes = Vec::with_capacity(m);
    for (a, p) in points.iter().enumerate() {
        let active: Vec<Vec<i64>> = int_facets
            .iter()
            .filter(|f| f.eval(p) == 0)
            .map(|f| f.kappa.clone())
            .collect();
        let class = if active.is_empty() {
            PointClass::Interior
        } else if rational_rank(&active) == k {
            vertices.push(a);
            PointClass::Vertex
        } else {
            PointClass::Boundary
        };
        classes.push(class);
    }

    let n_part = i64::from(sector.particles());
    let norms: Vec<T> = int_facets
        .iter()
        .map(|f| lit::<T>(f.kappa.iter().map(|&x| x * x).sum::<i64>() as f64).sqrt())
        .collect();
    let facets: Vec<FacetConstraint<T>> = int_facets
        .iter()
        .zip(&norms)
        .map(|(f, &nrm)| FacetConstraint {
            kappa: f.kappa.iter().map(|&x| lit::<T>(x as f64) / nrm).collect(),
            mu: lit::<T>(f.mu as f64) / nrm,
        })
        .collect();
    let raw_facets = int_facets.iter().map(|f| exact::sparsest_representative(f, n_part)).collect();

    // integer distances divided once by the norm, so zeros are exact
    let t = DMatrix::from_fn(facets.len(), m, |j, a| lit::<T>(int_facets[j].eval(&points[a]) as f64) / norms[j]);
    let (t_pinv, rank) = pseudoinverse(&t);
    let kernel = null_space(&t);

    Ok(DomainPolytope {
        sector: sector.clone(),
        affine_dim: k,
        vertices,
        classes,
        facets,
        raw_facets,
        t,
        t_pinv,
        kernel,
        rank,
        tangent,
    })
}

#[derive(Serialize, Deserialize)]
struct FacetRepr<T> {
    kappa: Vec<T>,
    mu: T,
    raw_kappa: Vec<i64>,
    raw_mu: i64,
}

#[derive(Serialize, Deserialize)]
struct PolytopeMeta {
    tangent_convention: String,
    raw_convention: String,
    rank_cutoff: f64,
    membership_tol: f64,
}

#[derive(Serialize, Deserialize)]
struct PolytopeRepr<T> {
    sector: Sector,
    affine_dim: usize,
    degenerate: bool,
    simplex_setting: bool,
    vertex_indices: Vec<usize>,
    vertices: Vec<Vec<u32>>,
    classes: Vec<PointClass>,
    facets: Vec<FacetRepr<T>>,
    #[serde(rename = "T")]
    t: Vec<Vec<T>>,
    #[serde(rename = "T_pinv")]
    t_pinv: Vec<Vec<T>>,
    /// kernel basis vectors (columns of the kernel matrix)
    kernel: Vec<Vec<T>>,
    rank: usize,
    tangent_basis: Vec<Vec<T>>,
    metadata: PolytopeMeta,
}

fn rows_of<T: Scalar>(m: &DMatrix<T>) -> Vec<Vec<T>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn cols_of<T: Scalar>(m: &DMatrix<T>) -> Vec<Vec<T>> {
    (0..m.ncols()).map(|j| m.column(j).iter().copied().collect()).collect()
}

fn from_rows<T: Scalar>(rows: &[Vec<T>], nrows: usize, ncols: usize) -> Result<DMatrix<T>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse(format!("expected a {nrows} x {ncols} matrix")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl<T: Scalar> Serialize for DomainPolytope<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = PolytopeRepr {
            sector: self.sector.clone(),
            affine_dim: self.affine_dim,
            degenerate: self.is_degenerate(),
            simplex_setting: self.is_simplex_setting(),
            vertex_indices: self.vertices.clone(),
            vertices: self.vertices.iter().map(|&v| self.sector.state(v).occ().to_vec()).collect(),
            classes: self.classes.clone(),
            facets: self
                .facets
                .iter()
                .zip(&self.raw_facets)
                .map(|(f, r)| FacetRepr {
                    kappa: f.kappa.clone(),
                    mu: f.mu,
                    raw_kappa: r.kappa.clone(),
                    raw_mu: r.mu,
                })
                .collect(),
            t: rows_of(&self.t),
            t_pinv: rows_of(&self.t_pinv),
            kernel: cols_of(&self.kernel),
            rank: self.rank,
            tangent_basis: cols_of(&self.tangent),
            metadata: PolytopeMeta {
                tangent_convention: TANGENT_CONVENTION.into(),
                raw_convention: "sparsest integer representative under kappa -> kappa + nu(1,...,1)".into(),
                rank_cutoff: RANK_CUTOFF,
                membership_tol: MEMBERSHIP_TOL,
            },
        };
        repr.serialize(s)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for DomainPolytope<T> {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = PolytopeRepr::<T>::deserialize(de)?;
        let m = r.sector.dim();
        let d = r.sector.d();
        let j = r.facets.len();
        let t = from_rows(&r.t, j, m).map_err(D::Error::custom)?;
        let t_pinv = from_rows(&r.t_pinv, m, j).map_err(D::Error::custom)?;
        let kcols = r.kernel.len();
        let kernel = from_rows(&r.kernel, kcols, m).map_err(D::Error::custom)?.transpose();
        let tcols = r.tangent_basis.len();
        let tangent = from_rows(&r.tangent_basis, tcols, d).map_err(D::Error::custom)?.transpose();
        if r.classes.len() != m {
            return Err(D::Error::custom("classification length mismatch"));
        }
        Ok(DomainPolytope {
            sector: r.sector,
            affine_dim: r.affine_dim,
            vertices: r.vertex_indices,
            classes: r.classes,
            facets: r.facets.iter().map(|f| FacetConstraint { kappa: f.kappa.clone(), mu: f.mu }).collect(),
            raw_facets: r.facets.iter().map(|f| IntFacet { kappa: f.raw_kappa.clone(), mu: f.raw_mu }).collect(),
            t,
            t_pinv,
            kernel,
            rank: r.rank,
            tangent,
        })
    }
}

impl<T: Scalar> DomainPolytope<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("polytope serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}
