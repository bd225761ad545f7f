//! Consistent monotone arcs of the powers of a parameterized relation, built
//! recursively from the monotone branches of the first power.

use std::collections::{BTreeSet, HashSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::plmap::{Interval, PLMap};
use crate::rat::Rat;
use crate::relation::{param_graph, Arc, MonotoneArc, PLRelation, RelError};

pub const DEFAULT_ARC_CAP: usize = 5_000_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BranchError {
    #[error("invalid family: {0}")]
    InvalidFamily(String),
    #[error("arc cap {cap} exceeded at level {level}")]
    ArcCap { cap: usize, level: usize, partial: Vec<BranchCount> },
    #[error(transparent)]
    Rel(#[from] RelError),
}

/// Where an arc of a family came from: a branch of the first power, or the pair
/// `(A, B)` with `A` from the first family and `B` from the previous one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Provenance {
    Branch(usize),
    Pair { a: usize, b: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchFamily {
    pub level: usize,
    pub arcs: Vec<MonotoneArc>,
    pub provenance: Vec<Provenance>,
}

impl BranchFamily {
    pub fn len(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    pub fn to_relation(&self) -> PLRelation {
        PLRelation::from_arcs(self.arcs.iter().cloned().map(Arc::Monotone).collect())
    }
}

fn dedupe(cands: Vec<(MonotoneArc, Provenance)>) -> (Vec<MonotoneArc>, Vec<Provenance>) {
    let keep: Vec<bool> = {
        let mut seen: HashSet<&MonotoneArc> = HashSet::with_capacity(cands.len());
        cands.iter().map(|(a, _)| seen.insert(a)).collect()
    };
    let mut arcs = Vec::with_capacity(cands.len());
    let mut prov = Vec::with_capacity(cands.len());
    for ((a, p), k) in cands.into_iter().zip(keep) {
        if k {
            arcs.push(a);
            prov.push(p);
        }
    }
    (arcs, prov)
}

/// The monotone branches of `{(f(t), g(t))}`; both maps must send `[0,1]` onto `[0,1]`
/// and have no common plateau pieces.
pub fn initial_branches(f: &PLMap, g: &PLMap) -> Result<BranchFamily, BranchError> {
    for (name, m) in [("f", f), ("g", g)] {
        if m.domain() != Interval::unit() || m.range() != Interval::unit() {
            return Err(BranchError::InvalidFamily(format!("{name} does not map [0,1] onto [0,1]")));
        }
    }
    let rel = param_graph(f, g)?;
    let mut cands = Vec::with_capacity(rel.len());
    for (i, a) in rel.into_arcs().into_iter().enumerate() {
        match a {
            Arc::Monotone(m) => cands.push((m, Provenance::Branch(i))),
            other => {
                return Err(BranchError::InvalidFamily(format!(
                    "degenerate branch over {} x {}",
                    other.x_range(),
                    other.y_range()
                )))
            }
        }
    }
    let (arcs, provenance) = dedupe(cands);
    Ok(BranchFamily { level: 1, arcs, provenance })
}

/// `C_k(A,B)`: follow `A`, then `B`, over `Z = π₂(A) ∩ π₁(B)`; `None` unless `Z` has
/// nonempty interior.
pub fn pair_arc(a: &MonotoneArc, b: &MonotoneArc) -> Option<MonotoneArc> {
    a.then(b)
}

/// All `C_k(A,B)` for a fixed `A`, in the order of `mk`.
pub fn descendants_of(a: &MonotoneArc, mk: &BranchFamily) -> Vec<MonotoneArc> {
    mk.arcs.iter().filter_map(|b| pair_arc(a, b)).collect()
}

/// `M_{k+1}` from `M_1` and `M_k`, deduplicated keeping the first occurrence in
/// `A`-major order. Pairs are generated in parallel and merged in a fixed order.
pub fn next_family(m1: &BranchFamily, mk: &BranchFamily) -> BranchFamily {
    assert_eq!(m1.level, 1, "first argument must be the level-one family");
    let mut cands: Vec<(MonotoneArc, Provenance)> = Vec::new();
    for (ai, a) in m1.arcs.iter().enumerate() {
        let part: Vec<(MonotoneArc, Provenance)> = mk
            .arcs
            .par_iter()
            .enumerate()
            .filter_map(|(bi, b)| pair_arc(a, b).map(|c| (c, Provenance::Pair { a: ai, b: bi })))
            .collect();
        cands.extend(part);
    }
    let (arcs, provenance) = dedupe(cands);
    BranchFamily { level: mk.level + 1, arcs, provenance }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchCount {
    pub k: usize,
    pub count: usize,
    /// `(1/k) log |M_k|`
    pub log_growth: f64,
    /// `(k+1) n^k` with `n` the larger lap count.
    pub bound: u128,
    pub within_bound: bool,
}

pub fn branch_counts(f: &PLMap, g: &PLMap, k_max: usize) -> Result<Vec<BranchCount>, BranchError> {
    branch_counts_capped(f, g, k_max, DEFAULT_ARC_CAP)
}

pub fn branch_counts_capped(f: &PLMap, g: &PLMap, k_max: usize, cap: usize) -> Result<Vec<BranchCount>, BranchError> {
    let n = f.lap_count().max(g.lap_count()) as u128;
    let m1 = initial_branches(f, g)?;
    let mut out = Vec::with_capacity(k_max);
    let mut cur = m1.clone();
    for k in 1..=k_max {
        if k > 1 {
            cur = next_family(&m1, &cur);
        }
        let count = cur.len();
        let bound = (k as u128 + 1) * n.pow(k as u32);
        out.push(BranchCount {
            k,
            count,
            log_growth: (count as f64).ln() / k as f64,
            bound,
            within_bound: count as u128 <= bound,
        });
        if count > cap && k < k_max {
            return Err(BranchError::ArcCap { cap, level: k, partial: out });
        }
    }
    Ok(out)
}

/// Checks that the critical points of the map with fewer laps (`m` laps, points `t̂_j`)
/// fall strictly inside lap `⌊n j / m⌋` of the map with `n > m` laps, and that the two
/// critical sets are disjoint.
pub fn interleave_check(f: &PLMap, g: &PLMap) -> bool {
    let (mut cf, mut cg) = (f.critical_points(), g.critical_points());
    if cf.len() > cg.len() {
        std::mem::swap(&mut cf, &mut cg);
    }
    let (m, n) = (cf.len() + 1, cg.len() + 1);
    if n <= m {
        return false;
    }
    let a: BTreeSet<&Rat> = cf.iter().collect();
    if cg.iter().any(|c| a.contains(c)) {
        return false;
    }
    let mut ts = vec![Rat::zero()];
    ts.extend(cg);
    ts.push(Rat::one());
    cf.iter().enumerate().all(|(j0, c)| {
        let j = j0 + 1;
        let i = ts.partition_point(|t| t < c) - 1;
        ts[i] < *c && *c < ts[i + 1] && i == n * j / m
    })
}

/// Number of distinct points of `M_k` over `z`.
pub fn fiber_cardinality(mk: &BranchFamily, z: &Rat) -> usize {
    let ys: BTreeSet<Rat> = mk.arcs.iter().filter_map(|a| a.eval(z)).collect();
    ys.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::tent;
    use crate::rat::r;

    fn t(n: u32) -> PLMap {
        tent(n).unwrap()
    }

    #[test]
    fn first_family_counts() {
        assert_eq!(initial_branches(&t(2), &t(3)).unwrap().len(), 4);
        assert_eq!(initial_branches(&t(3), &t(5)).unwrap().len(), 7);
        assert_eq!(initial_branches(&PLMap::identity(), &t(2)).unwrap().len(), 2);
        assert!(initial_branches(&crate::families::plateau_r(), &t(2)).is_err());
    }

    #[test]
    fn second_family_of_three_two() {
        let m1 = initial_branches(&t(2), &t(3)).unwrap();
        let m2 = next_family(&m1, &m1);
        assert_eq!(m2.len(), 14);
    }

    #[test]
    fn identity_pair_doubles() {
        let c = branch_counts(&PLMap::identity(), &t(2), 6).unwrap();
        let counts: Vec<usize> = c.iter().map(|b| b.count).collect();
        assert_eq!(counts, vec![2, 4, 8, 16, 32, 64]);
    }

    #[test]
    fn interleaving() {
        assert!(interleave_check(&t(2), &t(3)));
        assert!(interleave_check(&t(3), &t(5)));
        assert!(!interleave_check(&t(4), &t(6)));
    }

    #[test]
    fn fibers_of_three_two() {
        let m1 = initial_branches(&t(2), &t(3)).unwrap();
        assert_eq!(fiber_cardinality(&m1, &r(0, 1)), 2);
        assert_eq!(fiber_cardinality(&m1, &r(2, 3)), 2);
    }
}
