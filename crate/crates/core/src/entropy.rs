//! Entropy of relations: orbit enumeration with separated and spanning counts,
//! exact horseshoe certificates, and the certified lower/upper bracket for pairs of
//! tent maps.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::Write;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::branch::{branch_counts, BranchError};
use crate::families::tent;
use crate::plmap::{covers, iterate, merge_intervals, Interval, PLMap};
use crate::rat::Rat;
use crate::relation::{compose_rel, param_graph, strongly_commutes, PLRelation, RelError, XIndex};

pub const DEFAULT_ORBIT_CAP: usize = 2_000_000;
/// Largest instance solved exactly by the separated-set search.
pub const EXACT_SEPARATED_LIMIT: usize = 1000;
/// Largest instance solved exactly by the spanning-set search.
pub const EXACT_SPANNING_LIMIT: usize = 64;
const SEARCH_BUDGET: u64 = 2_000_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EntropyError {
    #[error("orbit cap {cap} exceeded at length {at}")]
    OrbitCap { cap: usize, at: usize },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Rel(#[from] RelError),
    #[error(transparent)]
    Branch(#[from] BranchError),
    #[error(transparent)]
    Map(#[from] crate::plmap::PlError),
    #[error(transparent)]
    Family(#[from] crate::families::FamilyError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitSet {
    pub n: usize,
    pub grid: Rat,
    pub orbits: Vec<Vec<Rat>>,
}

fn grid_points(grid: &Rat) -> Vec<Rat> {
    let mut v = Vec::new();
    let mut x = Rat::zero();
    while x <= Rat::one() {
        v.push(x.clone());
        x = &x + grid;
    }
    v
}

/// Grid points inside the fiber plus its isolated points and interval endpoints.
fn successors(rel: &PLRelation, x: &Rat, grid: &Rat) -> Vec<Rat> {
    let fiber = rel.evaluate_at(x);
    let mut out = Vec::new();
    for p in &fiber.parts {
        out.push(p.lo.clone());
        if !p.is_point() {
            let mut k = (&p.lo / grid).floor() + Rat::one();
            loop {
                let y = &k * grid;
                if y >= p.hi {
                    break;
                }
                out.push(y);
                k = k + Rat::one();
            }
            out.push(p.hi.clone());
        }
    }
    out
}

/// All length-`n` orbits starting on the grid, with later coordinates drawn from fibers.
/// Every consecutive pair satisfies exact fiber membership.
pub fn enumerate_orbits(rel: &PLRelation, n: usize, grid: &Rat) -> Result<OrbitSet, EntropyError> {
    enumerate_orbits_capped(rel, n, grid, DEFAULT_ORBIT_CAP)
}

pub fn enumerate_orbits_capped(rel: &PLRelation, n: usize, grid: &Rat, cap: usize) -> Result<OrbitSet, EntropyError> {
    if !grid.is_positive() || n == 0 {
        return Err(EntropyError::Precondition("need grid > 0 and n >= 1".into()));
    }
    let mut layer: Vec<Vec<Rat>> = grid_points(grid).into_iter().map(|x| vec![x]).collect();
    for at in 2..=n {
        let mut next = Vec::new();
        for o in &layer {
            for y in successors(rel, o.last().expect("nonempty"), grid) {
                let mut p = o.clone();
                p.push(y);
                next.push(p);
                if next.len() > cap {
                    return Err(EntropyError::OrbitCap { cap, at });
                }
            }
        }
        layer = next;
    }
    Ok(OrbitSet { n, grid: grid.clone(), orbits: layer })
}

/// Whether a count is exact or one side of the true value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Bound {
    Exact,
    LowerBound,
    UpperBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Count {
    pub value: usize,
    pub bound: Bound,
}

/// Orbits as float rows, compared in the max-over-time metric.
#[derive(Debug, Clone)]
pub struct Trajectories {
    rows: Vec<Vec<f64>>,
    block: usize,
}

impl Trajectories {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Trajectories {
        Trajectories { rows, block: 1 }
    }

    /// Rows made of consecutive blocks of `block` entries; the distance sums each block
    /// and takes the maximum over blocks.
    pub fn with_blocks(rows: Vec<Vec<f64>>, block: usize) -> Trajectories {
        assert!(block > 0);
        Trajectories { rows, block }
    }

    pub fn from_orbits(o: &OrbitSet) -> Trajectories {
        Trajectories::from_rows(o.orbits.iter().map(|v| v.iter().map(Rat::to_f64).collect()).collect())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .chunks(self.block)
            .zip(self.rows[j].chunks(self.block))
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

struct CliqueSearch<'a> {
    adj: &'a [Vec<u64>],
    best: Vec<usize>,
    steps: u64,
    exhausted: bool,
}

fn has(adj: &[Vec<u64>], u: usize, v: usize) -> bool {
    adj[u][v / 64] >> (v % 64) & 1 == 1
}

impl CliqueSearch<'_> {
    fn color_sort(&self, p: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for &v in p {
            match classes.iter_mut().find(|c| c.iter().all(|&u| !has(self.adj, u, v))) {
                Some(c) => c.push(v),
                None => classes.push(vec![v]),
            }
        }
        let mut order = Vec::with_capacity(p.len());
        let mut bounds = Vec::with_capacity(p.len());
        for (k, c) in classes.into_iter().enumerate() {
            for v in c {
                order.push(v);
                bounds.push(k + 1);
            }
        }
        (order, bounds)
    }

    fn expand(&mut self, current: &mut Vec<usize>, p: Vec<usize>) {
        self.steps += 1;
        if self.steps > SEARCH_BUDGET {
            self.exhausted = true;
            return;
        }
        let (order, bounds) = self.color_sort(&p);
        let mut remaining: Vec<usize> = order.clone();
        for idx in (0..order.len()).rev() {
            if current.len() + bounds[idx] <= self.best.len() || self.exhausted {
                return;
            }
            let v = order[idx];
            remaining.pop();
            let np: Vec<usize> = remaining.iter().copied().filter(|&u| has(self.adj, v, u)).collect();
            current.push(v);
            if np.is_empty() {
                if current.len() > self.best.len() {
                    self.best = current.clone();
                }
            } else {
                self.expand(current, np);
            }
            current.pop();
        }
    }
}

/// Maximum clique; `None` if the step budget ran out (the partial best is returned too).
fn max_clique(adj: &[Vec<u64>], n: usize) -> (Vec<usize>, bool) {
    let mut s = CliqueSearch { adj, best: Vec::new(), steps: 0, exhausted: false };
    let mut cur = Vec::new();
    s.expand(&mut cur, (0..n).collect());
    (s.best, !s.exhausted)
}

fn greedy_separated(t: &Trajectories, eps: f64) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::new();
    for i in 0..t.len() {
        if chosen.iter().all(|&j| t.dist(i, j) > eps) {
            chosen.push(i);
        }
    }
    chosen
}

/// Largest subset whose members are pairwise more than `eps` apart.
pub fn separated_count(t: &Trajectories, eps: f64) -> Count {
    let n = t.len();
    if n == 0 {
        return Count { value: 0, bound: Bound::Exact };
    }
    let greedy = greedy_separated(t, eps);
    if n > EXACT_SEPARATED_LIMIT {
        return Count { value: greedy.len(), bound: Bound::LowerBound };
    }
    let words = n.div_ceil(64);
    let mut adj = vec![vec![0u64; words]; n];
    for i in 0..n {
        for j in i + 1..n {
            if t.dist(i, j) > eps {
                adj[i][j / 64] |= 1 << (j % 64);
                adj[j][i / 64] |= 1 << (i % 64);
            }
        }
    }
    let (best, complete) = max_clique(&adj, n);
    let value = best.len().max(greedy.len());
    Count { value, bound: if complete { Bound::Exact } else { Bound::LowerBound } }
}

fn greedy_cover(cover: &[Vec<usize>], n: usize) -> usize {
    let mut covered = vec![false; n];
    let mut left = n;
    let mut used = 0;
    while left > 0 {
        let (best, _) = cover
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.iter().filter(|&&j| !covered[j]).count()))
            .max_by_key(|&(i, k)| (k, std::cmp::Reverse(i)))
            .expect("nonempty");
        for &j in &cover[best] {
            if !covered[j] {
                covered[j] = true;
                left -= 1;
            }
        }
        used += 1;
    }
    used
}

struct CoverSearch<'a> {
    cover: &'a [Vec<usize>],
    best: usize,
    steps: u64,
    exhausted: bool,
}

impl CoverSearch<'_> {
    fn search(&mut self, covered: &mut Vec<u32>, used: usize) {
        self.steps += 1;
        if self.steps > SEARCH_BUDGET {
            self.exhausted = true;
            return;
        }
        if used >= self.best {
            return;
        }
        // Pick the uncovered element with the fewest covering choices.
        let target = (0..covered.len()).filter(|&j| covered[j] == 0).min_by_key(|&j| self.cover[j].len());
        let Some(target) = target else {
            self.best = used;
            return;
        };
        if used + 1 >= self.best {
            return;
        }
        // The cover relation is symmetric: the sets covering `target` are its own neighbours.
        for &c in &self.cover[target] {
            for &j in &self.cover[c] {
                covered[j] += 1;
            }
            self.search(covered, used + 1);
            for &j in &self.cover[c] {
                covered[j] -= 1;
            }
            if self.exhausted {
                return;
            }
        }
    }
}

/// Smallest subset such that every orbit is within `eps` of a member.
pub fn spanning_count(t: &Trajectories, eps: f64) -> Count {
    let n = t.len();
    if n == 0 {
        return Count { value: 0, bound: Bound::Exact };
    }
    let cover: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| t.dist(i, j) <= eps).collect()).collect();
    let greedy = greedy_cover(&cover, n);
    if n > EXACT_SPANNING_LIMIT {
        return Count { value: greedy, bound: Bound::UpperBound };
    }
    let mut s = CoverSearch { cover: &cover, best: greedy, steps: 0, exhausted: false };
    s.search(&mut vec![0; n], 0);
    Count { value: s.best, bound: if s.exhausted { Bound::UpperBound } else { Bound::Exact } }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRow {
    pub n: usize,
    pub eps: f64,
    pub grid: String,
    pub orbits: usize,
    pub s_count: Count,
    pub r_count: Option<Count>,
    /// `(1/n) log s_{n,eps}`
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateTable {
    pub rows: Vec<EstimateRow>,
    /// For each `n`, the separated counts never decrease as `eps` shrinks.
    pub monotone_in_eps: bool,
}

impl EstimateTable {
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["n", "eps", "grid", "s_count", "r_count", "estimate"])?;
        for r in &self.rows {
            wr.write_record([
                r.n.to_string(),
                r.eps.to_string(),
                r.grid.clone(),
                r.s_count.value.to_string(),
                r.r_count.map(|c| c.value.to_string()).unwrap_or_default(),
                r.estimate.to_string(),
            ])?;
        }
        wr.flush()
    }
}

/// Spanning counts are skipped above this many orbits (quadratic memory).
const SPANNING_ORBIT_LIMIT: usize = 4000;

/// `(1/n) log s_{n,eps}` on grid orbits for each `n ≤ n_max` and `eps` in the schedule.
pub fn entropy_estimate(rel: &PLRelation, eps_schedule: &[f64], n_max: usize, grid: &Rat) -> Result<EstimateTable, EntropyError> {
    entropy_estimate_capped(rel, eps_schedule, n_max, grid, DEFAULT_ORBIT_CAP)
}

pub fn entropy_estimate_capped(
    rel: &PLRelation,
    eps_schedule: &[f64],
    n_max: usize,
    grid: &Rat,
    orbit_cap: usize,
) -> Result<EstimateTable, EntropyError> {
    if eps_schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(EntropyError::Precondition("eps schedule must be strictly decreasing".into()));
    }
    let mut rows = Vec::new();
    let mut monotone = true;
    for n in 1..=n_max {
        let orbits = enumerate_orbits_capped(rel, n, grid, orbit_cap)?;
        let t = Trajectories::from_orbits(&orbits);
        let mut prev = 0usize;
        for &eps in eps_schedule {
            let s = separated_count(&t, eps);
            let r = (t.len() <= SPANNING_ORBIT_LIMIT).then(|| spanning_count(&t, eps));
            if s.value < prev && s.bound == Bound::Exact {
                monotone = false;
            }
            prev = s.value;
            rows.push(EstimateRow {
                n,
                eps,
                grid: grid.to_string(),
                orbits: t.len(),
                s_count: s,
                r_count: r,
                estimate: (s.value.max(1) as f64).ln() / n as f64,
            });
        }
    }
    Ok(EstimateTable { rows, monotone_in_eps: monotone })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HorseshoeCert {
    pub intervals: Vec<Interval>,
    pub n: usize,
    /// Hash of the relation's point set.
    pub relation_id: String,
}

pub fn relation_id(rel: &PLRelation) -> String {
    let mut h = DefaultHasher::new();
    rel.segment_form().hash(&mut h);
    format!("{:016x}", h.finish())
}

fn image_with(idx: &XIndex<'_>, i: &Interval) -> Vec<Interval> {
    merge_intervals(idx.meeting(i).filter_map(|a| a.image(i)).collect())
}

fn is_horseshoe(idx: &XIndex<'_>, sets: &[Interval]) -> bool {
    let mut s = sets.to_vec();
    s.sort();
    if s.windows(2).any(|w| w[0].hi >= w[1].lo) {
        return false;
    }
    let u = merge_intervals(s.clone());
    s.iter().all(|a| covers(&image_with(idx, a), &u))
}

/// Exact check: pairwise disjoint, and the union lies in the image of every member.
pub fn verify_horseshoe(rel: &PLRelation, sets: &[Interval]) -> bool {
    is_horseshoe(&XIndex::new(rel.arcs()), sets)
}

/// Drops members whose image misses part of the union until none do.
fn prune(mut fam: Vec<(Interval, Vec<Interval>)>) -> Vec<(Interval, Vec<Interval>)> {
    loop {
        let u = merge_intervals(fam.iter().map(|p| p.0.clone()).collect());
        let before = fam.len();
        fam.retain(|(_, img)| covers(img, &u));
        if fam.len() == before || fam.is_empty() {
            return fam;
        }
    }
}

/// Shrinks touching members apart: shared endpoints move inward by `rho` of the member
/// length, outer ends of each touching run by `sigma`.
fn shrink(fam: &[Interval], sigma: &Rat, rho: &Rat) -> Vec<Interval> {
    let n = fam.len();
    (0..n)
        .map(|i| {
            let a = &fam[i];
            let len = a.len();
            let left_touch = i > 0 && fam[i - 1].hi == a.lo;
            let right_touch = i + 1 < n && fam[i + 1].lo == a.hi;
            let dl = if left_touch { rho } else { sigma };
            let dr = if right_touch { rho } else { sigma };
            Interval { lo: &a.lo + &len * dl, hi: &a.hi - &len * dr }
        })
        .collect()
}

/// Shrinking is only tried on families up to this size; larger relations rely on the
/// alternating families.
const SHRINK_LIMIT: usize = 256;

fn shrink_schedule() -> Vec<(Rat, Rat)> {
    let mut v = vec![(Rat::zero(), Rat::new(1, 3))];
    for s in [2i64, 4, 8] {
        for j in 1..=8i64 {
            v.push((Rat::new(1, s), Rat::new(1, s * j)));
        }
    }
    v
}

fn families_for_cuts(idx: &XIndex<'_>, cuts: &[Rat]) -> Vec<Vec<Interval>> {
    let elems: Vec<Interval> = cuts.windows(2).map(|w| Interval { lo: w[0].clone(), hi: w[1].clone() }).collect();
    let with_img: Vec<(Interval, Vec<Interval>)> = elems.iter().map(|e| (e.clone(), image_with(idx, e))).collect();
    let mut out = Vec::new();
    for p in 0..2 {
        let fam: Vec<_> = with_img.iter().enumerate().filter(|(i, _)| i % 2 == p).map(|(_, e)| e.clone()).collect();
        let fam = prune(fam);
        if !fam.is_empty() {
            out.push(fam.into_iter().map(|p| p.0).collect());
        }
    }
    let mut bases: Vec<Vec<Interval>> = Vec::new();
    let all = prune(with_img.clone());
    if !all.is_empty() {
        bases.push(all.into_iter().map(|p| p.0).collect());
    }
    if elems.len() <= SEEDED_LIMIT {
        let mut seeded = seeded_families(&with_img);
        seeded.sort_by_key(|f| std::cmp::Reverse(f.len()));
        for f in seeded.into_iter().take(SEEDED_SHRINK) {
            let f: Vec<Interval> = f.into_iter().map(|i| elems[i].clone()).collect();
            if !bases.contains(&f) {
                bases.push(f);
            }
        }
    }
    for base in bases {
        if base.len() > SHRINK_LIMIT {
            continue;
        }
        out.push(base.clone());
        for (sigma, rho) in shrink_schedule() {
            let shrunk = shrink(&base, &sigma, &rho);
            let fam: Vec<_> = shrunk.into_iter().map(|a| {
                let img = image_with(idx, &a);
                (a, img)
            }).collect();
            let fam = prune(fam);
            if !fam.is_empty() {
                out.push(fam.into_iter().map(|p| p.0).collect());
            }
        }
    }
    out
}

/// Cell counts up to which families seeded from single cells are also tried.
const SEEDED_LIMIT: usize = 1000;
/// How many of the largest seeded families get the shrink schedule.
const SEEDED_SHRINK: usize = 8;

/// For each cell `a`, the cells inside its image, pruned to a fixpoint within that set.
/// Finds horseshoes confined to an invariant part of the relation, which the global
/// prune discards. Returns distinct families of at least two cells, as cell indices.
fn seeded_families(cells: &[(Interval, Vec<Interval>)]) -> Vec<Vec<usize>> {
    let n = cells.len();
    let words = n.div_ceil(64);
    let mut cov = vec![vec![0u64; words]; n];
    for (a, (_, img)) in cells.iter().enumerate() {
        for part in img {
            let start = cells.partition_point(|(c, _)| c.lo < part.lo);
            for (b, (c, _)) in cells.iter().enumerate().skip(start) {
                if c.hi > part.hi {
                    break;
                }
                cov[a][b / 64] |= 1 << (b % 64);
            }
        }
    }
    let subset = |f: &[u64], g: &[u64]| f.iter().zip(g).all(|(x, y)| x & !y == 0);
    let mut seen: std::collections::HashSet<Vec<u64>> = std::collections::HashSet::new();
    let mut out = Vec::new();
    for a in 0..n {
        let mut fam = cov[a].clone();
        let mut members: Vec<usize> = (0..n).filter(|b| fam[b / 64] >> (b % 64) & 1 == 1).collect();
        loop {
            let keep: Vec<usize> = members.iter().copied().filter(|&b| subset(&fam, &cov[b])).collect();
            if keep.len() == members.len() {
                break;
            }
            for &b in &members {
                fam[b / 64] &= !(1 << (b % 64));
            }
            for &b in &keep {
                fam[b / 64] |= 1 << (b % 64);
            }
            members = keep;
        }
        if members.len() >= 2 && seen.insert(fam) {
            out.push(members);
        }
    }
    out
}

/// Relations up to this many arcs also try the vertices of the canonical form as cuts.
const CANONICAL_CUT_LIMIT: usize = 2000;

/// Largest step dividing every gap between consecutive cuts.
fn common_step(cuts: &[Rat]) -> Option<Rat> {
    let mut num = BigInt::zero();
    let mut den = BigInt::one();
    for w in cuts.windows(2) {
        let g = &w[1] - &w[0];
        let (gn, gd) = (g.numer(), g.denom());
        // gcd(a/b, c/d) = gcd(a d, c b) / (b d)
        num = (num * &gd).gcd(&(gn * &den));
        den *= gd;
        let r = num.gcd(&den);
        num /= &r;
        den /= r;
    }
    Rat::from_bigints(num, den).ok().filter(|s| s.is_positive())
}

/// The uniform grid generated by the common step of `cuts`, if it is not too fine.
fn uniform_refinement(cuts: &[Rat]) -> Option<Vec<Rat>> {
    const MAX_CELLS: usize = 50_000;
    let (lo, hi) = (cuts.first()?, cuts.last()?);
    let step = common_step(cuts)?;
    let cells = ((hi - lo) / &step).to_f64();
    if cells > MAX_CELLS as f64 || cells as usize + 1 == cuts.len() {
        return None;
    }
    let mut out = Vec::with_capacity(cells as usize + 1);
    let mut x = lo.clone();
    while &x <= hi {
        out.push(x.clone());
        x = &x + &step;
    }
    Some(out)
}

/// Candidate cut sets in search order: stored vertices, then their uniform refinement,
/// then (for small relations) canonical-form vertices and their refinement.
fn cut_sets(rel: &PLRelation) -> Vec<Vec<Rat>> {
    let clip = |v: Vec<Rat>| -> Vec<Rat> { v.into_iter().filter(|x| !x.is_negative() && *x <= Rat::one()).collect() };
    let stored = clip(rel.stored_x_cuts());
    let mut sets = Vec::new();
    let refined = uniform_refinement(&stored);
    sets.push(stored);
    sets.extend(refined);
    if rel.len() <= CANONICAL_CUT_LIMIT {
        let c = clip(rel.canonical().stored_x_cuts());
        if c != sets[0] {
            let refined = uniform_refinement(&c);
            sets.push(c);
            sets.extend(refined);
        }
    }
    sets
}

/// With `want = None` every cut set is tried and the largest family kept; otherwise the
/// first family of at least `want` members wins.
fn search(rel: &PLRelation, cuts: Option<&[Rat]>, want: Option<usize>) -> Option<Vec<Interval>> {
    let need = want.unwrap_or(1);
    let idx = XIndex::new(rel.arcs());
    let sets = match cuts {
        Some(c) => vec![c.to_vec()],
        None => cut_sets(rel),
    };
    let mut best: Option<Vec<Interval>> = None;
    for cs in sets {
        for fam in families_for_cuts(&idx, &cs) {
            if fam.len() >= need && best.as_ref().is_none_or(|b| fam.len() > b.len()) && is_horseshoe(&idx, &fam) {
                best = Some(fam);
            }
        }
        if want.is_some() && best.is_some() {
            break;
        }
    }
    best
}

fn cert(rel: &PLRelation, mut sets: Vec<Interval>, n: usize) -> HorseshoeCert {
    sets.truncate(n);
    HorseshoeCert { intervals: sets, n, relation_id: relation_id(rel) }
}

/// An exactly verified `n`-horseshoe drawn from intervals between arc-vertex cuts, or `None`.
pub fn find_horseshoe(rel: &PLRelation, n: usize) -> Option<HorseshoeCert> {
    search(rel, None, Some(n.max(1))).map(|s| cert(rel, s, n))
}

pub fn find_horseshoe_with_cuts(rel: &PLRelation, cuts: &[Rat], n: usize) -> Option<HorseshoeCert> {
    search(rel, Some(cuts), Some(n.max(1))).map(|s| cert(rel, s, n))
}

/// The largest certified horseshoe over all candidate families.
pub fn largest_horseshoe(rel: &PLRelation) -> Option<HorseshoeCert> {
    let s = search(rel, None, None)?;
    let n = s.len();
    Some(cert(rel, s, n))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterateBound {
    /// `(k, N_k, (1/k) log N_k)`
    pub per_k: Vec<(usize, usize, f64)>,
    pub best: f64,
    pub certs: Vec<HorseshoeCert>,
}

fn collect_bound(powers: impl Iterator<Item = Result<(usize, PLRelation), EntropyError>>) -> Result<IterateBound, EntropyError> {
    let mut per_k = Vec::new();
    let mut certs = Vec::new();
    let mut best = 0.0f64;
    for p in powers {
        let (k, rel) = p?;
        let (nk, c) = match largest_horseshoe(&rel) {
            Some(c) => (c.n, Some(c)),
            None => (1, None),
        };
        let v = (nk as f64).ln() / k as f64;
        best = best.max(v);
        per_k.push((k, nk, v));
        certs.extend(c);
    }
    Ok(IterateBound { per_k, best, certs })
}

/// `max_{k ≤ k_max} (1/k) log N_k` with `N_k` the largest certified horseshoe of `rel^k`.
pub fn iterate_horseshoe_bound(rel: &PLRelation, k_max: usize) -> Result<IterateBound, EntropyError> {
    let mut cur = rel.clone();
    let powers = (1..=k_max).map(move |k| {
        if k > 1 {
            cur = compose_rel(rel, &cur)?;
        }
        Ok((k, cur.clone()))
    });
    collect_bound(powers)
}

/// As [`iterate_horseshoe_bound`] for `{(f(t), g(t))}` with commuting `f`, `g`, using
/// `{(f^k(t), g^k(t))}` for the `k`-th power.
pub fn param_horseshoe_bound(f: &PLMap, g: &PLMap, k_max: usize) -> Result<IterateBound, EntropyError> {
    let powers = (1..=k_max).map(|k| Ok((k, param_graph(&iterate(f, k)?, &iterate(g, k)?)?)));
    collect_bound(powers)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BracketRow {
    pub k: usize,
    pub horseshoe: usize,
    /// Running maximum of `(1/j) log N_j`, `j ≤ k`.
    pub lower: f64,
    pub branches: usize,
    /// `(1/k) log |M_k|`
    pub upper: f64,
    pub slack: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BracketReport {
    pub n: u32,
    pub m: u32,
    pub target: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<BracketRow>,
    pub certs: Vec<HorseshoeCert>,
    pub ok: bool,
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Lower bounds from horseshoes of the powers, upper bounds from branch counts, around
/// the target `max(log n, log m)`. Symmetric in `(n, m)`.
pub fn bracket_theorem_main(n: u32, m: u32, k_max: usize) -> Result<BracketReport, EntropyError> {
    if gcd(n, m) != 1 {
        return Err(EntropyError::Precondition(format!("gcd({n}, {m}) != 1")));
    }
    let (lo, hi) = (n.min(m), n.max(m));
    let (f, g) = (tent(lo)?, tent(hi)?);
    if !strongly_commutes(&f, &g)? {
        return Err(EntropyError::Precondition(format!("T_{lo} and T_{hi} do not commute strongly")));
    }
    let target = (hi as f64).ln();
    let counts = branch_counts(&f, &g, k_max)?;
    let hs = param_horseshoe_bound(&f, &g, k_max)?;
    let mut rows = Vec::with_capacity(k_max);
    let mut lower = Vec::with_capacity(k_max);
    let mut run = 0.0f64;
    for (c, (k, nk, v)) in counts.iter().zip(&hs.per_k) {
        run = run.max(*v);
        let slack = ((k + 1) as f64).ln() / *k as f64;
        let ok = run <= target && target <= c.log_growth && c.log_growth <= target + slack;
        lower.push(run);
        rows.push(BracketRow { k: *k, horseshoe: *nk, lower: run, branches: c.count, upper: c.log_growth, slack, ok });
    }
    let ok = rows.iter().all(|r| r.ok);
    Ok(BracketReport {
        n,
        m,
        target,
        lower,
        upper: counts.iter().map(|c| c.log_growth).collect(),
        rows,
        certs: hs.certs,
        ok,
    })
}
