//! Minimization of `sum_ab W_ab eta_a^* eta_b s_a s_b` over unit phases for fixed moduli `s >= 0`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::{lit, tol, to_f64, Scalar};

/// Sign patterns are enumerated exhaustively up to this support size.
pub const EXHAUSTIVE_LIMIT: usize = 20;
const GREEDY_RESTARTS: usize = 8;
const PHASE_STARTS: usize = 8;

/// Real or complex coefficients.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseMode {
    #[default]
    Real,
    Complex,
}

fn quadratic<T: Scalar>(w: &DMatrix<T>, s: &[T], eta: &[T]) -> T {
    let m = s.len();
    let mut v = T::zero();
    for a in 0..m {
        if s[a] == T::zero() {
            continue;
        }
        for b in 0..m {
            v += w[(a, b)] * eta[a] * eta[b] * s[a] * s[b];
        }
    }
    v
}

/// Best real sign vector. Entries outside the support of `s` are `+1`.
pub fn minimize_signs<T: Scalar>(w: &DMatrix<T>, s: &[T], seed: u64) -> (T, Vec<T>) {
    let m = s.len();
    let support: Vec<usize> = (0..m).filter(|&a| s[a] > T::zero()).collect();
    let mut eta = vec![T::one(); m];
    if support.len() <= 1 {
        return (quadratic(w, s, &eta), eta);
    }
    let sub_eta = if support.len() <= EXHAUSTIVE_LIMIT {
        exhaustive(w, s, &support)
    } else {
        greedy(w, s, &support, seed)
    };
    for (i, &a) in support.iter().enumerate() {
        eta[a] = sub_eta[i];
    }
    (quadratic(w, s, &eta), eta)
}

// Gray-code walk over sign patterns with the first sign fixed, O(m) per flip.
fn exhaustive<T: Scalar>(w: &DMatrix<T>, s: &[T], support: &[usize]) -> Vec<T> {
    let m = support.len();
    let mm = DMatrix::from_fn(m, m, |i, j| w[(support[i], support[j])] * s[support[i]] * s[support[j]]);
    let mut eta = vec![T::one(); m];
    let mut field: Vec<T> = (0..m).map(|i| mm.row(i).sum()).collect();
    let mut value = field.iter().fold(T::zero(), |a, &b| a + b);
    let mut best = value;
    let mut best_eta = eta.clone();
    let margin = tol::<T>(1e-14) * (T::one() + mm.amax());
    let four: T = lit(4.0);
    let two: T = lit(2.0);
    for step in 1u64..(1u64 << (m - 1)) {
        // flip index: lowest set bit of the step, offset past the fixed sign
        let i = step.trailing_zeros() as usize + 1;
        let old = eta[i];
        value -= four * old * (field[i] - mm[(i, i)] * old);
        eta[i] = -old;
        for j in 0..m {
            field[j] -= two * mm[(j, i)] * old;
        }
        if value < best - margin {
            best = value;
            best_eta.copy_from_slice(&eta);
        }
    }
    best_eta
}

fn greedy<T: Scalar>(w: &DMatrix<T>, s: &[T], support: &[usize], seed: u64) -> Vec<T> {
    let m = support.len();
    let mm = DMatrix::from_fn(m, m, |i, j| w[(support[i], support[j])] * s[support[i]] * s[support[j]]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(T, Vec<T>)> = None;
    for restart in 0..GREEDY_RESTARTS {
        let mut eta: Vec<T> = (0..m)
            .map(|_| if restart == 0 || rng.random::<bool>() { T::one() } else { -T::one() })
            .collect();
        loop {
            let mut improved = false;
            for i in 0..m {
                let off: T = (0..m).filter(|&j| j != i).fold(T::zero(), |a, j| a + mm[(i, j)] * eta[j]);
                // flipping i changes the value by -4 eta_i off_i
                if eta[i] * off > tol::<T>(1e-14) * (T::one() + mm.amax()) {
                    eta[i] = -eta[i];
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        let v = quadratic(&mm, &vec![T::one(); m], &eta);
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, eta));
        }
    }
    best.expect("at least one restart").1
}

/// Best complex phases (returned as angles, first support entry fixed at 0),
/// by coordinate-wise exact minimization from several starts including the
/// best real pattern.
pub fn minimize_phases<T: Scalar>(w: &DMatrix<T>, s: &[T], seed: u64) -> (T, Vec<f64>) {
    let m = s.len();
    let sf: Vec<f64> = s.iter().map(|&x| to_f64(x)).collect();
    let wf = DMatrix::from_fn(m, m, |i, j| to_f64(w[(i, j)]));
    let support: Vec<usize> = (0..m).filter(|&a| sf[a] > 0.0).collect();
    let eval = |phi: &[f64]| -> f64 {
        let mut v = 0.0;
        for &a in &support {
            for &b in &support {
                v += wf[(a, b)] * sf[a] * sf[b] * (phi[a] - phi[b]).cos();
            }
        }
        v
    };
    let (_, eta) = minimize_signs(w, s, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in 0..PHASE_STARTS {
        let mut phi: Vec<f64> = if start == 0 {
            eta.iter().map(|&e| if e < T::zero() { std::f64::consts::PI } else { 0.0 }).collect()
        } else {
            (0..m).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect()
        };
        let mut value = eval(&phi);
        for _ in 0..20_000 {
            for &a in support.iter().skip(1) {
                let (mut re, mut im) = (0.0, 0.0);
                for &b in &support {
                    if b != a {
                        re += wf[(a, b)] * sf[b] * phi[b].cos();
                        im += wf[(a, b)] * sf[b] * phi[b].sin();
                    }
                }
                if re != 0.0 || im != 0.0 {
                    phi[a] = im.atan2(re) + std::f64::consts::PI;
                }
            }
            let next = eval(&phi);
            let done = value - next <= 1e-16 * (1.0 + value.abs());
            value = next;
            if done {
                break;
            }
        }
        if let Some(&a0) = support.first() {
            let shift = phi[a0];
            for p in phi.iter_mut() {
                *p -= shift;
            }
        }
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, phi));
        }
    }
    let (v, phi) = best.expect("phase starts");
    (lit(v), phi)
}

/// `min_eta sum W_ab eta_a eta_b s_a s_b` in the requested phase mode.
pub fn minimize_quadratic<T: Scalar>(w: &DMatrix<T>, s: &[T], mode: PhaseMode, seed: u64) -> (T, Option<Vec<T>>) {
    match mode {
        PhaseMode::Real => {
            let (v, eta) = minimize_signs(w, s, seed);
            (v, Some(eta))
        }
        PhaseMode::Complex => {
            let (vr, eta) = minimize_signs(w, s, seed);
            let (vc, _) = minimize_phases(w, s, seed);
            if vr <= vc {
                (vr, Some(eta))
            } else {
                (vc, None)
            }
        }
    }
}
