//! Exact integer geometry for lattice-point polytopes.
//!
//! Points are integer occupation vectors, so affine hulls, facet normals and
//! incidences are computed without rounding.

use std::collections::BTreeSet;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Signed, Zero};

type Q = Ratio<i128>;

/// Integer facet inequality `kappa . n + mu >= 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IntFacet {
    pub kappa: Vec<i64>,
    pub mu: i64,
}

impl IntFacet {
    pub fn eval(&self, p: &[i64]) -> i128 {
        self.kappa
            .iter()
            .zip(p)
            .map(|(&k, &x)| i128::from(k) * i128::from(x))
            .sum::<i128>()
            + i128::from(self.mu)
    }
}

/// Reduced row echelon form over the rationals; returns pivot columns.
fn rref(rows: &mut [Vec<Q>]) -> Vec<usize> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r == nrows {
            break;
        }
        let Some(p) = (r..nrows).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let inv = Q::one() / rows[r][c];
        for x in rows[r].iter_mut() {
            *x *= inv;
        }
        for i in 0..nrows {
            if i != r && !rows[i][c].is_zero() {
                let f = rows[i][c];
                let pivot_row = rows[r].clone();
                for (x, y) in rows[i].iter_mut().zip(pivot_row) {
                    *x -= f * y;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

fn to_q(v: &[i64]) -> Vec<Q> {
    v.iter().map(|&x| Q::from_integer(i128::from(x))).collect()
}

/// Scales a rational vector to a primitive integer vector with the same direction.
fn primitive(v: &[Q]) -> Vec<i64> {
    let lcm = v.iter().fold(1i128, |acc, x| acc.lcm(x.denom()));
    let ints: Vec<i128> = v.iter().map(|x| (x * Q::from_integer(lcm)).to_integer()).collect();
    let g = ints.iter().fold(0i128, |acc, &x| acc.gcd(&x));
    let g = if g == 0 { 1 } else { g };
    ints.iter().map(|&x| i64::try_from(x / g).expect("small integers")).collect()
}

/// Rank of the affine hull of `points` and an integer basis of its direction space.
pub fn affine_hull(points: &[Vec<i64>]) -> (usize, Vec<Vec<i64>>) {
    if points.len() < 2 {
        return (0, Vec::new());
    }
    let p0 = &points[0];
    let mut rows: Vec<Vec<Q>> = points[1..]
        .iter()
        .map(|p| to_q(&p.iter().zip(p0).map(|(a, b)| a - b).collect::<Vec<_>>()))
        .collect();
    let pivots = rref(&mut rows);
    let basis = rows[..pivots.len()].iter().map(|r| primitive(r)).collect();
    (pivots.len(), basis)
}

/// Integer basis of the orthogonal complement of the row space of `rows` in `Z^d`.
pub fn orthogonal_complement(rows: &[Vec<i64>], d: usize) -> Vec<Vec<i64>> {
    if rows.is_empty() {
        return (0..d)
            .map(|i| {
                let mut e = vec![0; d];
                e[i] = 1;
                e
            })
            .collect();
    }
    let mut m: Vec<Vec<Q>> = rows.iter().map(|r| to_q(r)).collect();
    let pivots = rref(&mut m);
    let free: Vec<usize> = (0..d).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![Q::zero(); d];
            v[f] = Q::one();
            for (r, &pc) in pivots.iter().enumerate() {
                v[pc] = -m[r][f];
            }
            primitive(&v)
        })
        .collect()
}

fn det(m: &[Vec<i128>]) -> i128 {
    // Bareiss fraction-free elimination
    let n = m.len();
    if n == 0 {
        return 1;
    }
    let mut a: Vec<Vec<i128>> = m.to_vec();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if a[k][k] == 0 {
            let Some(swap) = (k + 1..n).find(|&i| a[i][k] != 0) else {
                return 0;
            };
            a.swap(k, swap);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    sign * a[n - 1][n - 1]
}

/// Generalized cross product of `d - 1` vectors in `Z^d`: the vector orthogonal
/// to all of them, zero iff they are linearly dependent.
pub fn cross(vectors: &[Vec<i64>], d: usize) -> Vec<i128> {
    debug_assert_eq!(vectors.len(), d - 1);
    (0..d)
        .map(|i| {
            let minor: Vec<Vec<i128>> = vectors
                .iter()
                .map(|v| {
                    v.iter()
                        .enumerate()
                        .filter(|&(c, _)| c != i)
                        .map(|(_, &x)| i128::from(x))
                        .collect()
                })
                .collect();
            let s = if i % 2 == 0 { 1 } else { -1 };
            s * det(&minor)
        })
        .collect()
}

fn gcd_all(v: &[i128]) -> i128 {
    v.iter().fold(0i128, |acc, &x| acc.gcd(&x))
}

/// All facets of `conv(candidates)` inside the affine hull described by
/// `complement` (integer normals of the hull), found by testing every
/// affinely independent `dim`-subset of candidates.
pub fn enumerate_facets(
    candidates: &[Vec<i64>],
    dim: usize,
    complement: &[Vec<i64>],
    d: usize,
) -> Vec<IntFacet> {
    let mut found = BTreeSet::new();
    if dim == 0 {
        return Vec::new();
    }
    let m = candidates.len();
    let mut idx: Vec<usize> = (0..dim).collect();
    if m < dim {
        return Vec::new();
    }
    loop {
        if let Some(f) = facet_through(candidates, &idx, complement, d) {
            found.insert(f);
        }
        // next combination
        let mut i = dim;
        loop {
            if i == 0 {
                return found.into_iter().collect();
            }
            i -= 1;
            if idx[i] != i + m - dim {
                break;
            }
            if i == 0 && idx[0] == m - dim {
                return found.into_iter().collect();
            }
        }
        idx[i] += 1;
        for j in i + 1..dim {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Supporting hyperplane through the chosen points, if they span a facet.
pub fn facet_through(
    points: &[Vec<i64>],
    chosen: &[usize],
    complement: &[Vec<i64>],
    d: usize,
) -> Option<IntFacet> {
    let q0 = &points[chosen[0]];
    let mut vecs: Vec<Vec<i64>> = chosen[1..]
        .iter()
        .map(|&i| points[i].iter().zip(q0).map(|(a, b)| a - b).collect())
        .collect();
    vecs.extend(complement.iter().cloned());
    if vecs.len() != d - 1 {
        return None;
    }
    let k = cross(&vecs, d);
    let g = gcd_all(&k);
    if g == 0 {
        return None;
    }
    let kappa: Vec<i128> = k.iter().map(|&x| x / g).collect();
    let mu: i128 = -kappa.iter().zip(q0).map(|(&a, &b)| a * i128::from(b)).sum::<i128>();
    let vals: Vec<i128> = points
        .iter()
        .map(|p| kappa.iter().zip(p).map(|(&a, &b)| a * i128::from(b)).sum::<i128>() + mu)
        .collect();
    let sign = if vals.iter().all(|&v| v >= 0) {
        1
    } else if vals.iter().all(|&v| v <= 0) {
        -1
    } else {
        return None;
    };
    if vals.iter().all(|&v| v == 0) {
        return None;
    }
    Some(IntFacet {
        kappa: kappa.iter().map(|&x| i64::try_from(sign * x).expect("small")).collect(),
        mu: i64::try_from(sign * mu).expect("small"),
    })
}

/// Sparsest integer representative of a facet under the shift
/// `kappa -> kappa + nu (1, ..., 1)`, `mu -> mu - nu N`. Ties prefer the
/// smaller norm, then fewer negative entries.
pub fn sparsest_representative(f: &IntFacet, n_particles: i64) -> IntFacet {
    let mut cands = vec![f.kappa.iter().map(|&x| i128::from(x)).collect::<Vec<_>>()];
    let mus = |nu: i128| i128::from(f.mu) - nu * i128::from(n_particles);
    let mut mu_list = vec![i128::from(f.mu)];
    for &k in &f.kappa {
        let nu = -i128::from(k);
        cands.push(f.kappa.iter().map(|&x| i128::from(x) + nu).collect());
        mu_list.push(mus(nu));
    }
    // (nonzeros, squared norm, negatives, lexicographic tie-break)
    type Rank = (usize, i128, usize, Vec<i128>);
    let mut best: Option<(Rank, IntFacet)> = None;
    for (kap, mu) in cands.into_iter().zip(mu_list) {
        let mut all = kap.clone();
        all.push(mu);
        let g = gcd_all(&all);
        if kap.iter().all(|&x| x == 0) || g == 0 {
            continue;
        }
        let kap: Vec<i128> = kap.iter().map(|&x| x / g).collect();
        let mu = mu / g;
        let nnz = kap.iter().filter(|&&x| x != 0).count();
        let norm2: i128 = kap.iter().map(|&x| x * x).sum();
        let neg = kap.iter().filter(|&&x| x < 0).count();
        let key = (nnz, norm2, neg, kap.iter().map(|x| -x).collect::<Vec<_>>());
        let cand = IntFacet {
            kappa: kap.iter().map(|&x| i64::try_from(x).expect("small")).collect(),
            mu: i64::try_from(mu).expect("small"),
        };
        if best.as_ref().is_none_or(|(bk, _)| key < *bk) {
            best = Some((key, cand));
        }
    }
    best.map(|(_, f)| f).unwrap_or_else(|| f.clone())
}

/// True if `p` satisfies every facet inequality and lies in the affine hull.
pub fn inside(facets: &[IntFacet], complement: &[Vec<i64>], anchor: &[i64], p: &[i64]) -> bool {
    let in_hull = complement.iter().all(|c| {
        c.iter()
            .zip(p.iter().zip(anchor))
            .map(|(&a, (&x, &y))| i128::from(a) * i128::from(x - y))
            .sum::<i128>()
            == 0
    });
    in_hull && facets.iter().all(|f| f.eval(p) >= 0)
}

pub fn abs_max(v: &[i64]) -> i64 {
    v.iter().map(|x| x.abs()).max().unwrap_or(0)
}
