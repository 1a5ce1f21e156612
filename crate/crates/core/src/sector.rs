//! Occupation-number configurations and total-momentum sectors.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sectors larger than this are rejected: dense solves become impractical.
pub const MAX_SECTOR_DIM: usize = 200_000;

/// Bosonic occupation vector `(n_0, ..., n_{d-1})` in the momentum basis.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConfigState(pub Vec<u32>);

impl ConfigState {
    pub fn new(occ: Vec<u32>) -> Self {
        ConfigState(occ)
    }

    pub fn occ(&self) -> &[u32] {
        &self.0
    }

    pub fn sites(&self) -> usize {
        self.0.len()
    }

    pub fn particles(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn max_occupation(&self) -> u32 {
        self.0.iter().copied().max().unwrap_or(0)
    }

    /// The occupation vector as floating-point coordinates.
    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&x| f64::from(x)).collect()
    }
}

impl fmt::Display for ConfigState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (i, n) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, ">")
    }
}

/// Total lattice momentum `sum_k k n_k mod d`.
pub fn total_momentum(state: &ConfigState, d: usize) -> usize {
    state
        .occ()
        .iter()
        .enumerate()
        .fold(0usize, |acc, (k, &n)| (acc + k * n as usize) % d)
}

/// Canonical basis order: maximal occupation descending, then
/// lexicographically descending.
pub fn basis_order(a: &ConfigState, b: &ConfigState) -> std::cmp::Ordering {
    b.max_occupation()
        .cmp(&a.max_occupation())
        .then_with(|| b.occ().cmp(a.occ()))
}

/// Ordered basis of the `N`-boson subspace with total momentum `P` on `d` sites.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sector {
    d: usize,
    n: u32,
    p: usize,
    states: Vec<ConfigState>,
    index: HashMap<ConfigState, usize>,
}

#[derive(Serialize, Deserialize)]
struct SectorRepr {
    d: usize,
    #[serde(rename = "N")]
    n: u32,
    #[serde(rename = "P")]
    p: usize,
    states: Vec<ConfigState>,
}

impl Serialize for Sector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SectorRepr {
            d: self.d,
            n: self.n,
            p: self.p,
            states: self.states.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Sector {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let repr = SectorRepr::deserialize(de)?;
        Sector::from_states(repr.d, repr.n, repr.p, repr.states).map_err(serde::de::Error::custom)
    }
}

fn check_args(d: usize, n: u32, p: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::InvalidArgument("d must be at least 1".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    if p >= d {
        return Err(Error::InvalidArgument(format!("P = {p} not in [0, {d})")));
    }
    Ok(())
}

/// Number of configurations with `sum n = N` and momentum `P`, counted by
/// dynamic programming over modes without enumerating them.
pub fn sector_dimension(d: usize, n: u32, p: usize) -> Result<usize> {
    check_args(d, n, p)?;
    let n = n as usize;
    // ways[m][q]: configurations of the modes seen so far with m particles and momentum q
    let mut ways = vec![vec![0u128; d]; n + 1];
    ways[0][0] = 1;
    for k in 0..d {
        let mut next = vec![vec![0u128; d]; n + 1];
        for m in 0..=n {
            for q in 0..d {
                let w = ways[m][q];
                if w == 0 {
                    continue;
                }
                for add in 0..=(n - m) {
                    next[m + add][(q + k * add) % d] += w;
                }
            }
        }
        ways = next;
    }
    Ok(usize::try_from(ways[n][p]).unwrap_or(usize::MAX))
}

fn compositions(d: usize, n: u32, out: &mut Vec<Vec<u32>>) {
    fn rec(prefix: &mut Vec<u32>, left: u32, slots: usize, out: &mut Vec<Vec<u32>>) {
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
    rec(&mut Vec::with_capacity(d), n, d, out);
}

/// All occupation vectors of `N` bosons on `d` modes, lexicographically descending.
pub fn all_configurations(d: usize, n: u32) -> Vec<ConfigState> {
    let mut raw = Vec::new();
    compositions(d, n, &mut raw);
    raw.into_iter().map(ConfigState).collect()
}

/// Enumerates the sector `(d, N, P)` in canonical basis order.
pub fn enumerate_sector(d: usize, n: u32, p: usize) -> Result<Sector> {
    let dim = sector_dimension(d, n, p)?;
    if dim > MAX_SECTOR_DIM {
        return Err(Error::SectorTooLarge {
            dim,
            limit: MAX_SECTOR_DIM,
        });
    }
    let mut states: Vec<ConfigState> = all_configurations(d, n)
        .into_iter()
        .filter(|s| total_momentum(s, d) == p)
        .collect();
    states.sort_by(basis_order);
    Ok(Sector::build(d, n, p, states))
}

impl Sector {
    fn build(d: usize, n: u32, p: usize, states: Vec<ConfigState>) -> Self {
        let index = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Sector {
            d,
            n,
            p,
            states,
            index,
        }
    }

    /// Builds a sector with a caller-chosen basis order. The states must be
    /// exactly the configurations of `(d, N, P)`.
    pub fn from_states(d: usize, n: u32, p: usize, states: Vec<ConfigState>) -> Result<Self> {
        check_args(d, n, p)?;
        let reference = enumerate_sector(d, n, p)?;
        if states.len() != reference.dim() {
            return Err(Error::InvalidArgument(format!(
                "expected {} states, got {}",
                reference.dim(),
                states.len()
            )));
        }
        let built = Sector::build(d, n, p, states);
        if built.index.len() != built.states.len() {
            return Err(Error::InvalidArgument("duplicate states".into()));
        }
        for s in &built.states {
            if !reference.contains(s) {
                return Err(Error::InvalidArgument(format!(
                    "{s} is not in sector (d={d}, N={n}, P={p})"
                )));
            }
        }
        Ok(built)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn particles(&self) -> u32 {
        self.n
    }

    pub fn momentum(&self) -> usize {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[ConfigState] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &ConfigState {
        &self.states[i]
    }

    pub fn index_of(&self, s: &ConfigState) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn contains(&self, s: &ConfigState) -> bool {
        self.index.contains_key(s)
    }

    /// Occupation vectors as rows of `f64`.
    pub fn occupations_f64(&self) -> Vec<Vec<f64>> {
        self.states.iter().map(ConfigState::to_f64).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("sector serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cs(v: &[u32]) -> ConfigState {
        ConfigState(v.to_vec())
    }

    #[test]
    fn d3_n3_p0_listing_and_order() {
        let s = enumerate_sector(3, 3, 0).unwrap();
        let want = [cs(&[3, 0, 0]), cs(&[0, 3, 0]), cs(&[0, 0, 3]), cs(&[1, 1, 1])];
        assert_eq!(s.states(), &want);
    }

    #[test]
    fn d3_n3_p1_as_set() {
        let s = enumerate_sector(3, 3, 1).unwrap();
        let mut got: Vec<_> = s.states().to_vec();
        got.sort();
        let mut want = vec![cs(&[2, 1, 0]), cs(&[0, 2, 1]), cs(&[1, 0, 2])];
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn single_particle_sector_is_unit_vector() {
        for d in 1..6 {
            for k in 0..d {
                let s = enumerate_sector(d, 1, k).unwrap();
                let mut e = vec![0; d];
                e[k] = 1;
                assert_eq!(s.states(), &[ConfigState(e)]);
            }
        }
    }

    #[test]
    fn d2_n4() {
        let s0 = enumerate_sector(2, 4, 0).unwrap();
        let mut got: Vec<_> = s0.states().to_vec();
        got.sort();
        assert_eq!(got, vec![cs(&[0, 4]), cs(&[2, 2]), cs(&[4, 0])]);
        assert_eq!(sector_dimension(2, 4, 1).unwrap(), 2);
    }

    #[test]
    fn momentum_examples() {
        assert_eq!(total_momentum(&cs(&[2, 1, 0]), 3), 1);
        assert_eq!(total_momentum(&cs(&[3, 0, 0]), 3), 0);
        assert_eq!(total_momentum(&cs(&[1, 1, 1]), 3), 0);
    }

    #[test]
    fn dimensions() {
        assert_eq!(sector_dimension(3, 3, 0).unwrap(), 4);
        assert_eq!(sector_dimension(3, 3, 1).unwrap(), 3);
        assert_eq!(sector_dimension(2, 4, 1).unwrap(), 2);
    }

    #[test]
    fn invalid_momentum_rejected() {
        assert!(matches!(enumerate_sector(3, 3, 5), Err(Error::InvalidArgument(_))));
        assert!(matches!(sector_dimension(3, 3, 3), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn d1_only_p0() {
        assert_eq!(enumerate_sector(1, 4, 0).unwrap().dim(), 1);
    }

    #[test]
    fn oversized_sector_rejected() {
        assert!(matches!(
            enumerate_sector(6, 60, 0),
            Err(Error::SectorTooLarge { .. })
        ));
    }

    #[test]
    fn json_roundtrip_keeps_order() {
        let s = enumerate_sector(3, 4, 1).unwrap();
        let text = s.to_json();
        assert!(text.starts_with("{\"d\":3,\"N\":4,\"P\":1,\"states\":[["));
        let back: Sector = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn from_states_rejects_foreign_state() {
        let err = Sector::from_states(3, 3, 1, vec![cs(&[3, 0, 0]), cs(&[0, 2, 1]), cs(&[1, 0, 2])]);
        assert!(err.is_err());
    }
}
