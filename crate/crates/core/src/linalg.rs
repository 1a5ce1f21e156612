//! Small dense linear-algebra helpers on top of `nalgebra` matrices.

use nalgebra::{DMatrix, DVector};

use crate::scalar::{tol, Scalar};

/// Relative singular-value cutoff used for rank decisions.
pub const RANK_CUTOFF: f64 = 1e-10;

/// Sweep cap of the Jacobi iteration; convergence is quadratic, so this is
/// never reached in practice.
const MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi on a tall `m x n` matrix: returns the
/// orthogonalized columns `A V` and the accumulated rotations `V`.
fn jacobi<T: Scalar>(mut u: DMatrix<T>) -> (DMatrix<T>, DMatrix<T>) {
    let n = u.ncols();
    let mut v = DMatrix::<T>::identity(n, n);
    let eps = T::default_epsilon();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = u.column(p).norm_squared();
                let beta = u.column(q).norm_squared();
                let gamma = u.column(p).dot(&u.column(q));
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma + gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for m in [&mut u, &mut v] {
                    for i in 0..m.nrows() {
                        let (x, y) = (m[(i, p)], m[(i, q)]);
                        m[(i, p)] = c * x - s * y;
                        m[(i, q)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    (u, v)
}

/// Full SVD of an `m x n` matrix: `(U (m x m), sigma (min(m, n)), V (n x n))`,
/// singular values descending. The thin factors are completed to square
/// orthogonal matrices.
///
/// One-sided Jacobi rather than `nalgebra::SVD`: the latter returned
/// factorizations with O(0.1) reconstruction error on some rank-deficient
/// inputs.
pub fn full_svd<T: Scalar>(a: &DMatrix<T>) -> (DMatrix<T>, Vec<T>, DMatrix<T>) {
    let (m, n) = a.shape();
    let wide = m < n;
    let (av, rot) = jacobi(if wide { a.transpose() } else { a.clone() });
    let norms: Vec<T> = (0..av.ncols()).map(|j| av.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..av.ncols()).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap_or(std::cmp::Ordering::Equal));
    let sigma: Vec<T> = order.iter().map(|&i| norms[i]).collect();
    // directions of (numerically) zero singular values come from the completion
    let smax = sigma.first().copied().unwrap_or_else(T::zero);
    let keep: Vec<usize> =
        order.iter().copied().filter(|&i| norms[i] > tol::<T>(RANK_CUTOFF) * smax && norms[i] > T::zero()).collect();
    let left: Vec<DVector<T>> = keep.iter().map(|&i| av.column(i) / norms[i]).collect();
    let right: Vec<DVector<T>> = keep.iter().map(|&i| rot.column(i).into_owned()).collect();
    // for a wide input the factorization is of A^T, so the roles swap
    let (ucols, vcols) = if wide { (right, left) } else { (left, right) };
    (complete_basis(ucols, m), sigma, complete_basis(vcols, n))
}

/// Extends orthonormal columns to an orthonormal basis of `R^dim`: the
/// trailing columns of the full Householder `Q` of the given ones.
fn complete_basis<T: Scalar>(cols: Vec<DVector<T>>, dim: usize) -> DMatrix<T> {
    let r = cols.len();
    if r == 0 {
        return DMatrix::identity(dim, dim);
    }
    let mut out = DMatrix::<T>::zeros(dim, dim);
    for (c, col) in cols.iter().enumerate() {
        out.set_column(c, col);
    }
    if r < dim {
        let qr = out.columns(0, r).into_owned().qr();
        let mut qt = DMatrix::<T>::identity(dim, dim);
        qr.q_tr_mul(&mut qt);
        let q = qt.transpose();
        out.columns_mut(r, dim - r).copy_from(&q.columns(r, dim - r));
    }
    out
}

/// Moore-Penrose pseudoinverse with singular values below
/// `RANK_CUTOFF * sigma_max` treated as zero. Returns `(pinv, rank)`.
pub fn pseudoinverse<T: Scalar>(a: &DMatrix<T>) -> (DMatrix<T>, usize) {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return (DMatrix::zeros(n, m), 0);
    }
    let (u, s, v) = full_svd(a);
    let smax = s.iter().copied().fold(T::zero(), |x, y| if y > x { y } else { x });
    let cutoff = tol::<T>(RANK_CUTOFF) * smax;
    let mut pinv = DMatrix::<T>::zeros(n, m);
    let mut rank = 0;
    for (i, &si) in s.iter().enumerate() {
        if si > cutoff && si > T::zero() {
            rank += 1;
            let vi = v.column(i);
            let ui = u.column(i);
            pinv += vi * ui.transpose() / si;
        }
    }
    (pinv, rank)
}

/// Orthonormal basis of `ker(a)` as columns.
pub fn null_space<T: Scalar>(a: &DMatrix<T>) -> DMatrix<T> {
    let (m, n) = a.shape();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    if m == 0 {
        return DMatrix::identity(n, n);
    }
    let (_, s, v) = full_svd(a);
    let smax = s.iter().copied().fold(T::zero(), |x, y| if y > x { y } else { x });
    let cutoff = tol::<T>(RANK_CUTOFF) * smax;
    let rank = s.iter().filter(|&&x| x > cutoff && x > T::zero()).count();
    v.columns(rank, n - rank).into_owned()
}

/// Orthonormal basis of the column span of `a` as columns.
pub fn column_span<T: Scalar>(a: &DMatrix<T>) -> DMatrix<T> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return DMatrix::zeros(m, 0);
    }
    let (u, s, _) = full_svd(a);
    let smax = s.iter().copied().fold(T::zero(), |x, y| if y > x { y } else { x });
    let cutoff = tol::<T>(RANK_CUTOFF) * smax;
    let rank = s.iter().filter(|&&x| x > cutoff && x > T::zero()).count();
    u.columns(0, rank).into_owned()
}

/// Nonnegative least squares `min ||A x - b||, x >= 0` (Lawson-Hanson active set).
pub fn nnls<T: Scalar>(a: &DMatrix<T>, b: &DVector<T>) -> DVector<T> {
    let (_, n) = a.shape();
    let mut x = DVector::<T>::zeros(n);
    let mut passive = vec![false; n];
    let tolerance = tol::<T>(1e-12) * (T::one() + a.amax() * b.amax());
    let max_outer = 3 * n + 10;
    for _ in 0..max_outer {
        let w = a.transpose() * (b - a * &x);
        let cand = (0..n)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| w[i].partial_cmp(&w[j]).unwrap_or(std::cmp::Ordering::Equal));
        match cand {
            Some(j) if w[j] > tolerance => passive[j] = true,
            _ => break,
        }
        loop {
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let sub = a.select_columns(idx.iter());
            let (pinv, _) = pseudoinverse(&sub);
            let z_sub = pinv * b;
            let mut z = DVector::<T>::zeros(n);
            for (k, &j) in idx.iter().enumerate() {
                z[j] = z_sub[k];
            }
            if idx.iter().all(|&j| z[j] > T::zero()) {
                x = z;
                break;
            }
            let mut alpha = T::one();
            for &j in &idx {
                if z[j] <= T::zero() {
                    let denom = x[j] - z[j];
                    if denom > T::zero() {
                        let r = x[j] / denom;
                        if r < alpha {
                            alpha = r;
                        }
                    }
                }
            }
            for j in 0..n {
                let xj = x[j];
                x[j] = xj + alpha * (z[j] - xj);
            }
            for &j in &idx {
                if x[j] <= tol::<T>(1e-14) {
                    x[j] = T::zero();
                    passive[j] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x
}
