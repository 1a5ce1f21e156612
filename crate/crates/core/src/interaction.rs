//! Second-quantized operators on a sector basis.
//!
//! Matrix elements of `sum W_{k1 k2 k3 k4} b+_{k1} b+_{k2} b_{k3} b_{k4}` are
//! assembled by applying the ladder operators to occupation vectors.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::io::fmt_g17;
use crate::scalar::{from_usize, lit, to_f64, tol, Scalar};
use crate::sector::{ConfigState, Sector};

/// Momentum-conserving two-body interaction with real amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct PairInteraction<T: Scalar> {
    d: usize,
    coefficients: BTreeMap<[usize; 4], T>,
}

fn conserves(d: usize, k: &[usize; 4]) -> bool {
    (k[0] + k[1]) % d == (k[2] + k[3]) % d
}

impl<T: Scalar> PairInteraction<T> {
    /// Builds an interaction from explicit amplitudes. Keys must conserve
    /// momentum and the table must be Hermitian.
    pub fn new(d: usize, coefficients: BTreeMap<[usize; 4], T>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("d must be at least 1".into()));
        }
        for (k, v) in &coefficients {
            if k.iter().any(|&x| x >= d) {
                return Err(Error::InvalidArgument(format!("momentum index out of range in {k:?}")));
            }
            if !conserves(d, k) {
                return Err(Error::InvalidArgument(format!("{k:?} violates momentum conservation")));
            }
            let adj = [k[3], k[2], k[1], k[0]];
            let other = coefficients.get(&adj).copied().unwrap_or_else(T::zero);
            if (other - *v).abs() > tol::<T>(1e-12) * (T::one() + v.abs()) {
                return Err(Error::InvalidArgument(format!(
                    "interaction is not Hermitian: W{k:?} != W{adj:?}"
                )));
            }
        }
        Ok(PairInteraction { d, coefficients })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn amplitude(&self, k: [usize; 4]) -> Option<T> {
        self.coefficients.get(&k).copied()
    }

    pub fn coefficients(&self) -> &BTreeMap<[usize; 4], T> {
        &self.coefficients
    }

    /// Parses a coefficient table: one `k1,k2,k3,k4,amplitude` row per line,
    /// `#` starts a comment.
    pub fn from_table(d: usize, text: &str) -> Result<Self> {
        let mut coefficients = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 5 {
                return Err(Error::Parse(format!("line {}: expected 5 fields", lineno + 1)));
            }
            let mut k = [0usize; 4];
            for (slot, f) in k.iter_mut().zip(&fields[..4]) {
                *slot = f
                    .parse()
                    .map_err(|_| Error::Parse(format!("line {}: bad index {f:?}", lineno + 1)))?;
            }
            let amp: f64 = fields[4]
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad amplitude", lineno + 1)))?;
            if !amp.is_finite() {
                return Err(Error::Parse(format!("line {}: amplitude not finite", lineno + 1)));
            }
            *coefficients.entry(k).or_insert_with(T::zero) += lit::<T>(amp);
        }
        PairInteraction::new(d, coefficients)
    }
}

/// Bose-Hubbard on-site interaction: amplitude `1/d` on every
/// momentum-conserving quadruple.
pub fn hubbard_interaction<T: Scalar>(d: usize) -> PairInteraction<T> {
    let mut coefficients = BTreeMap::new();
    let amp = T::one() / from_usize::<T>(d.max(1));
    for k1 in 0..d {
        for k2 in 0..d {
            for k3 in 0..d {
                let k4 = (k1 + k2 + d * 2 - k3) % d;
                coefficients.insert([k1, k2, k3, k4], amp);
            }
        }
    }
    PairInteraction { d, coefficients }
}

/// Dense symmetric operator on a sector basis.
#[derive(Clone, Debug)]
pub struct SectorOperator<T: Scalar> {
    pub sector: Sector,
    pub matrix: DMatrix<T>,
}

impl<T: Scalar> SectorOperator<T> {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_symmetric(&self, tolerance: T) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..i).all(|j| (self.matrix[(i, j)] - self.matrix[(j, i)]).abs() <= tolerance))
    }

    /// Row-major CSV with `%.17g` formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.matrix.nrows() {
            let row: Vec<String> = (0..self.matrix.ncols())
                .map(|j| fmt_g17(to_f64(self.matrix[(i, j)])))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Single-particle dispersion `t_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct KineticVector<T: Scalar>(pub Vec<T>);

impl<T: Scalar> KineticVector<T> {
    pub fn new(t: Vec<T>) -> Result<Self> {
        if t.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("kinetic vector has non-finite entries".into()));
        }
        Ok(KineticVector(t))
    }

    pub fn zeros(d: usize) -> Self {
        KineticVector(vec![T::zero(); d])
    }

    pub fn dot_state(&self, s: &ConfigState) -> T {
        self.0
            .iter()
            .zip(s.occ())
            .fold(T::zero(), |acc, (&t, &n)| acc + t * lit::<T>(f64::from(n)))
    }

    pub fn dot(&self, n: &[T]) -> T {
        self.0.iter().zip(n).fold(T::zero(), |acc, (&t, &x)| acc + t * x)
    }
}

/// Applies `b_k` in place, returning the amplitude `sqrt(n_k)` (zero kills the state).
fn annihilate<T: Scalar>(occ: &mut [u32], k: usize) -> T {
    let n = occ[k];
    if n == 0 {
        return T::zero();
    }
    occ[k] -= 1;
    lit::<T>(f64::from(n)).sqrt()
}

fn create<T: Scalar>(occ: &mut [u32], k: usize) -> T {
    occ[k] += 1;
    lit::<T>(f64::from(occ[k])).sqrt()
}

/// Matrix of the interaction on a sector basis.
pub fn build_interaction_matrix<T: Scalar>(
    w: &PairInteraction<T>,
    sector: &Sector,
) -> Result<SectorOperator<T>> {
    if w.d() != sector.d() {
        return Err(Error::DimensionMismatch(format!(
            "interaction has d = {}, sector has d = {}",
            w.d(),
            sector.d()
        )));
    }
    let dim = sector.dim();
    let mut matrix = DMatrix::<T>::zeros(dim, dim);
    let mut work = vec![0u32; sector.d()];
    for (beta, state) in sector.states().iter().enumerate() {
        for (k, &amp) in w.coefficients() {
            work.copy_from_slice(state.occ());
            let mut factor = annihilate::<T>(&mut work, k[3]);
            if factor == T::zero() {
                continue;
            }
            factor *= annihilate::<T>(&mut work, k[2]);
            if factor == T::zero() {
                continue;
            }
            factor *= create::<T>(&mut work, k[1]);
            factor *= create::<T>(&mut work, k[0]);
            let target = ConfigState(work.clone());
            if let Some(alpha) = sector.index_of(&target) {
                matrix[(alpha, beta)] += amp * factor;
            }
        }
    }
    let op = SectorOperator {
        sector: sector.clone(),
        matrix,
    };
    debug_assert!(op.is_symmetric(tol::<T>(1e-12) * (T::one() + op.matrix.amax())));
    Ok(op)
}

/// `H = diag(t . n^(alpha)) + W`.
pub fn build_hamiltonian<T: Scalar>(
    t: &KineticVector<T>,
    wmat: &SectorOperator<T>,
) -> Result<SectorOperator<T>> {
    if t.0.len() != wmat.sector.d() {
        return Err(Error::DimensionMismatch(format!(
            "kinetic vector has {} entries, sector has d = {}",
            t.0.len(),
            wmat.sector.d()
        )));
    }
    let mut matrix = wmat.matrix.clone();
    for (i, s) in wmat.sector.states().iter().enumerate() {
        matrix[(i, i)] += t.dot_state(s);
    }
    Ok(SectorOperator {
        sector: wmat.sector.clone(),
        matrix,
    })
}

/// Lowest eigenpair of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct GroundState<T: Scalar> {
    pub energy: T,
    pub coefficients: DVector<T>,
    /// `E_1 - E_0`; zero for one-dimensional problems is reported as infinity.
    pub gap: T,
}

/// Sorted symmetric eigendecomposition (ascending eigenvalues, column eigenvectors).
pub fn sorted_eigen<T: Scalar>(h: &DMatrix<T>) -> (Vec<T>, DMatrix<T>) {
    let eig = SymmetricEigen::new(h.clone());
    let n = h.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::<T>::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        vectors.set_column(c, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Fixes the sign of a vector so that its largest-magnitude entry is positive
/// (first such entry on ties).
pub fn fix_sign<T: Scalar>(v: &mut DVector<T>) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() + tol::<T>(1e-12) {
            best = i;
        }
    }
    if !v.is_empty() && v[best] < T::zero() {
        v.neg_mut();
    }
}

pub fn ground_state_of<T: Scalar>(h: &DMatrix<T>) -> Result<GroundState<T>> {
    let n = h.nrows();
    if n == 0 || h.ncols() != n {
        return Err(Error::DimensionMismatch("ground state of a non-square or empty matrix".into()));
    }
    let (values, vectors) = sorted_eigen(h);
    let energy = values[0];
    let mut coefficients = vectors.column(0).into_owned();
    fix_sign(&mut coefficients);
    let residual = (h * &coefficients - &coefficients * energy).norm();
    let scale = h.norm().max(T::one());
    if residual > tol::<T>(1e-10) * scale {
        return Err(Error::ConvergenceFailure {
            residual: to_f64(residual),
        });
    }
    let gap = if n > 1 {
        values[1] - values[0]
    } else {
        lit::<T>(f64::INFINITY)
    };
    Ok(GroundState {
        energy,
        coefficients,
        gap,
    })
}

pub fn ground_state<T: Scalar>(h: &SectorOperator<T>) -> Result<GroundState<T>> {
    ground_state_of(&h.matrix)
}

/// Eigenvalues closer than this are treated as degenerate.
pub fn degeneracy_threshold<T: Scalar>(h: &DMatrix<T>) -> T {
    tol::<T>(1e-9) * h.norm().max(T::one())
}
