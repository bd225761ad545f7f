//! Truncated inverse limits of `[0,1]`, diagonal maps on them, and the set-valued
//! components `g_{i+1} ∘ f_{i+1}⁻¹` that bound their entropy.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::branch::branch_counts;
use crate::entropy::{
    enumerate_orbits_capped, largest_horseshoe, param_horseshoe_bound, separated_count, Count, EntropyError, HorseshoeCert,
    Trajectories,
};
use crate::families::{appendix_maps, block_bounds, FamilyError, FamilySpec};
use crate::plmap::{compose, PLMap};
use crate::rat::Rat;
use crate::relation::{compose_rel, graph_of, inverse_rel, param_graph, rel_equals, PLRelation, RelError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InvLimError {
    #[error("level {level} not available (system has {have} levels)")]
    Depth { level: usize, have: usize },
    #[error("depth mismatch: {0} vs {1}")]
    DepthMismatch(usize, usize),
    #[error("point is not consistent under the bonding map at level {0}")]
    Inconsistent(usize),
    #[error("orbit cannot be lifted: no admissible preimage at level {level}")]
    Lift { level: usize },
    #[error("orbit is not an orbit of the level-{level} component at step {step}")]
    NotAnOrbit { level: usize, step: usize },
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error(transparent)]
    Rel(#[from] RelError),
    #[error(transparent)]
    Map(#[from] crate::plmap::PlError),
}

/// Bonding maps `f_i : X_i → X_{i-1}` and diagonal maps `g_i : X_i → X_{i-1}` for
/// `1 ≤ i ≤ levels`, every `X_i = [0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalSystem {
    f: Vec<PLMap>,
    g: Vec<PLMap>,
}

/// Serializable description of a system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum SystemSpec {
    /// The same `f` and `g` at every level.
    Constant { f: FamilySpec, g: FamilySpec },
    /// Per-level specs, `f[i-1] = f_i`.
    Levels { f: Vec<FamilySpec>, g: Vec<FamilySpec> },
    /// The block construction, with the sequence repeated periodically.
    Appendix { n_seq: Vec<u32>, s: Rat },
}

impl SystemSpec {
    pub fn build(&self, levels: usize) -> Result<DiagonalSystem, InvLimError> {
        match self {
            SystemSpec::Constant { f, g } => Ok(DiagonalSystem::constant(&f.build()?, &g.build()?, levels)),
            SystemSpec::Levels { f, g } => {
                let f = f.iter().map(FamilySpec::build).collect::<Result<Vec<_>, _>>()?;
                let g = g.iter().map(FamilySpec::build).collect::<Result<Vec<_>, _>>()?;
                DiagonalSystem::new(f, g)
            }
            SystemSpec::Appendix { n_seq, s } => DiagonalSystem::appendix(n_seq, s, levels),
        }
    }
}

impl DiagonalSystem {
    pub fn new(f: Vec<PLMap>, g: Vec<PLMap>) -> Result<DiagonalSystem, InvLimError> {
        if f.len() != g.len() {
            return Err(InvLimError::DepthMismatch(f.len(), g.len()));
        }
        Ok(DiagonalSystem { f, g })
    }

    pub fn constant(f: &PLMap, g: &PLMap, levels: usize) -> DiagonalSystem {
        DiagonalSystem { f: vec![f.clone(); levels], g: vec![g.clone(); levels] }
    }

    /// The shift `(x_0, x_1, …) ↦ (f(x_0), x_0, x_1, …)`: diagonal maps `g = f ∘ f`.
    pub fn shift(f: &PLMap, levels: usize) -> Result<DiagonalSystem, InvLimError> {
        Ok(DiagonalSystem::constant(f, &compose(f, f)?, levels))
    }

    /// The inverse shift `(x_0, x_1, …) ↦ (x_1, x_2, …)`: diagonal maps `g = id`.
    pub fn backward_shift(f: &PLMap, levels: usize) -> DiagonalSystem {
        DiagonalSystem::constant(f, &PLMap::identity(), levels)
    }

    /// The block-assembled system; level `k` uses `n_seq[(k-1) mod len]`.
    pub fn appendix(n_seq: &[u32], s: &Rat, levels: usize) -> Result<DiagonalSystem, InvLimError> {
        if n_seq.is_empty() {
            return Err(FamilyError::Param("empty sequence".into()).into());
        }
        let seq: Vec<u32> = (0..levels).map(|i| n_seq[i % n_seq.len()]).collect();
        let mut f = Vec::with_capacity(levels);
        let mut g = Vec::with_capacity(levels);
        for k in 1..=levels {
            let (fk, gk) = appendix_maps(k, &seq, s)?;
            f.push(fk);
            g.push(gk);
        }
        Ok(DiagonalSystem { f, g })
    }

    pub fn levels(&self) -> usize {
        self.f.len()
    }

    fn check_level(&self, i: usize) -> Result<(), InvLimError> {
        if i == 0 || i > self.f.len() {
            return Err(InvLimError::Depth { level: i, have: self.f.len() });
        }
        Ok(())
    }

    /// `f_i`
    pub fn bonding(&self, i: usize) -> Result<&PLMap, InvLimError> {
        self.check_level(i)?;
        Ok(&self.f[i - 1])
    }

    /// `g_i`
    pub fn diagonal(&self, i: usize) -> Result<&PLMap, InvLimError> {
        self.check_level(i)?;
        Ok(&self.g[i - 1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompatReport {
    pub ok: bool,
    /// Levels `i` with `g_i ∘ f_{i+1} ≠ f_i ∘ g_{i+1}`.
    pub failed: Vec<usize>,
}

/// Checks `g_i ∘ f_{i+1} = f_i ∘ g_{i+1}` exactly for `1 ≤ i < depth`.
pub fn check_diagonal_compat(sys: &DiagonalSystem, depth: usize) -> Result<CompatReport, InvLimError> {
    let mut failed = Vec::new();
    for i in 1..depth {
        let lhs = compose(sys.diagonal(i)?, sys.bonding(i + 1)?)?;
        let rhs = compose(sys.bonding(i)?, sys.diagonal(i + 1)?)?;
        if lhs != rhs {
            failed.push(i);
        }
    }
    Ok(CompatReport { ok: failed.is_empty(), failed })
}

/// Checks `g_{i+1} ∘ f_{i+1}⁻¹ = f_i⁻¹ ∘ g_i` as relations for `1 ≤ i < depth`, the
/// hypothesis under which orbits of the components lift. A two-dimensional right side
/// counts as a failure.
pub fn check_lifting_condition(sys: &DiagonalSystem, depth: usize) -> Result<CompatReport, InvLimError> {
    let mut failed = Vec::new();
    for i in 1..depth {
        let lhs = param_graph(sys.bonding(i + 1)?, sys.diagonal(i + 1)?)?;
        let ok = match compose_rel(&inverse_rel(&graph_of(sys.bonding(i)?)), &graph_of(sys.diagonal(i)?)) {
            Ok(rhs) => rel_equals(&lhs, &rhs),
            Err(RelError::TwoDimensional { .. }) => false,
            Err(e) => return Err(e.into()),
        };
        if !ok {
            failed.push(i);
        }
    }
    Ok(CompatReport { ok: failed.is_empty(), failed })
}

/// `ψ_i = g_{i+1} ∘ f_{i+1}⁻¹`, as the curve `{(f_{i+1}(t), g_{i+1}(t))}`.
pub fn psi_component(sys: &DiagonalSystem, i: usize) -> Result<PLRelation, InvLimError> {
    Ok(param_graph(sys.bonding(i + 1)?, sys.diagonal(i + 1)?)?)
}

/// The coordinates `(x_0, …, x_d)` of a point of the inverse limit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct TruncatedPoint {
    pub coords: Vec<Rat>,
}

impl TruncatedPoint {
    pub fn depth(&self) -> usize {
        self.coords.len() - 1
    }

    /// The point with `x_d = x`, lower coordinates pushed forward by the bonding maps.
    pub fn from_top(sys: &DiagonalSystem, x: Rat, d: usize) -> Result<TruncatedPoint, InvLimError> {
        let mut coords = vec![x; d + 1];
        for i in (1..=d).rev() {
            coords[i - 1] = sys.bonding(i)?.eval(&coords[i])?;
        }
        Ok(TruncatedPoint { coords })
    }

    /// The point with `x_0 = x` and each deeper coordinate the smallest preimage of the
    /// one above it.
    pub fn from_base(sys: &DiagonalSystem, x: Rat, d: usize) -> Result<TruncatedPoint, InvLimError> {
        let mut coords = Vec::with_capacity(d + 1);
        coords.push(x);
        for i in 1..=d {
            let y = smallest_preimage(sys.bonding(i)?, &coords[i - 1]).ok_or(InvLimError::Lift { level: i })?;
            coords.push(y);
        }
        Ok(TruncatedPoint { coords })
    }

    /// Checks `f_i(x_i) = x_{i-1}`; returns the first failing level.
    pub fn check(&self, sys: &DiagonalSystem) -> Result<(), InvLimError> {
        for i in 1..self.coords.len() {
            if sys.bonding(i)?.eval(&self.coords[i])? != self.coords[i - 1] {
                return Err(InvLimError::Inconsistent(i));
            }
        }
        Ok(())
    }

    pub fn truncate(&self, d: usize) -> TruncatedPoint {
        TruncatedPoint { coords: self.coords[..=d.min(self.depth())].to_vec() }
    }
}

/// `Ψ(x)_i = g_{i+1}(x_{i+1})`; the depth drops by one.
pub fn apply_diagonal(sys: &DiagonalSystem, p: &TruncatedPoint) -> Result<TruncatedPoint, InvLimError> {
    let d = p.depth();
    if d == 0 {
        return Err(InvLimError::Depth { level: 1, have: 0 });
    }
    let coords = (0..d).map(|i| sys.diagonal(i + 1)?.eval(&p.coords[i + 1]).map_err(Into::into)).collect::<Result<Vec<_>, InvLimError>>()?;
    Ok(TruncatedPoint { coords })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricValue {
    /// `Σ_{i ≤ d} |x_i − y_i| / 2^i`
    pub value: f64,
    /// Bound on the omitted coordinates, `2^{-d}`.
    pub tail: f64,
}

pub fn truncated_metric(p: &TruncatedPoint, q: &TruncatedPoint) -> Result<MetricValue, InvLimError> {
    if p.depth() != q.depth() {
        return Err(InvLimError::DepthMismatch(p.depth(), q.depth()));
    }
    let value = p
        .coords
        .iter()
        .zip(&q.coords)
        .enumerate()
        .map(|(i, (a, b))| (a - b).abs().to_f64() / 2f64.powi(i as i32))
        .sum();
    Ok(MetricValue { value, tail: 2f64.powi(-(p.depth() as i32)) })
}

/// All `y` with `f(y) = a` and `g(y) = b`, ascending. Where both are constant on an
/// interval of solutions, its endpoints stand in for it.
fn joint_preimages(f: &PLMap, g: &PLMap, a: &Rat, b: &Rat) -> Vec<Rat> {
    let mut pre: Vec<(Rat, Rat)> = Vec::new();
    for w in f.breakpoints().windows(2) {
        let ((x0, y0), (x1, y1)) = (&w[0], &w[1]);
        if y0 == y1 {
            if y0 == a {
                pre.push((x0.clone(), x1.clone()));
            }
        } else if (y0 <= a && a <= y1) || (y1 <= a && a <= y0) {
            let x = x0 + (x1 - x0) * (a - y0) / (y1 - y0);
            pre.push((x.clone(), x));
        }
    }
    let mut out = Vec::new();
    for (lo, hi) in pre {
        if lo == hi {
            if g.eval_in(&lo) == *b {
                out.push(lo);
            }
            continue;
        }
        let piece = g.restrict_in(&lo, &hi);
        for w in piece.breakpoints().windows(2) {
            let ((x0, y0), (x1, y1)) = (&w[0], &w[1]);
            if y0 == y1 {
                if y0 == b {
                    out.push(x0.clone());
                    out.push(x1.clone());
                }
            } else if (y0 <= b && b <= y1) || (y1 <= b && b <= y0) {
                out.push(x0 + (x1 - x0) * (b - y0) / (y1 - y0));
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

const LIFT_BUDGET: u64 = 1_000_000;

struct Lifter<'a> {
    sys: &'a DiagonalSystem,
    level: usize,
    rows: Vec<Vec<Rat>>,
    steps: u64,
    deepest_failure: usize,
}

impl Lifter<'_> {
    /// Fills row `j`, cell `k` (0-based) and everything after it in row-major order.
    fn fill(&mut self, j: usize, k: usize) -> Result<bool, InvLimError> {
        self.steps += 1;
        if self.steps > LIFT_BUDGET {
            return Ok(false);
        }
        let n = self.rows[0].len();
        if j == n {
            return Ok(true);
        }
        if k == n - j {
            return self.fill(j + 1, 0);
        }
        let lvl = self.level + j;
        let (f, g) = (self.sys.bonding(lvl)?, self.sys.diagonal(lvl)?);
        let cands = joint_preimages(f, g, &self.rows[j - 1][k], &self.rows[j - 1][k + 1]);
        if cands.is_empty() {
            self.deepest_failure = self.deepest_failure.max(lvl);
        }
        for y in cands {
            self.rows[j].push(y);
            if self.fill(j, k + 1)? {
                return Ok(true);
            }
            self.rows[j].pop();
        }
        Ok(false)
    }
}

/// A point `ξ` of depth `depth` with `π_level(Ψ^k(ξ)) = orbit[k]` for every `k`, built
/// row by row from joint preimages (smallest admissible choice first).
pub fn lift_orbit(sys: &DiagonalSystem, level: usize, orbit: &[Rat], depth: usize) -> Result<TruncatedPoint, InvLimError> {
    let n = orbit.len();
    if n == 0 {
        return Err(InvLimError::NotAnOrbit { level, step: 0 });
    }
    let top = level + n - 1;
    if depth < top {
        return Err(InvLimError::Depth { level: top, have: depth });
    }
    let psi = psi_component(sys, level)?;
    for k in 0..n - 1 {
        if !psi.evaluate_at(&orbit[k]).contains(&orbit[k + 1]) {
            return Err(InvLimError::NotAnOrbit { level, step: k });
        }
    }
    let mut rows = vec![orbit.to_vec()];
    rows.extend((1..n).map(|j| Vec::with_capacity(n - j)));
    let mut lifter = Lifter { sys, level, rows, steps: 0, deepest_failure: level + 1 };
    if !lifter.fill(1, 0)? {
        return Err(InvLimError::Lift { level: lifter.deepest_failure });
    }
    let column: Vec<Rat> = lifter.rows.iter().map(|r| r[0].clone()).collect();
    let mut coords = vec![Rat::zero(); depth + 1];
    for (j, y) in column.into_iter().enumerate() {
        coords[level + j] = y;
    }
    for i in (0..level).rev() {
        coords[i] = sys.bonding(i + 1)?.eval(&coords[i + 1])?;
    }
    for i in top + 1..=depth {
        let f = sys.bonding(i)?;
        coords[i] = smallest_preimage(f, &coords[i - 1]).ok_or(InvLimError::Lift { level: i })?;
    }
    Ok(TruncatedPoint { coords })
}

/// Whether `π_level(Ψ^k(p)) = orbit[k]` for every `k`.
pub fn projects_onto(sys: &DiagonalSystem, level: usize, p: &TruncatedPoint, orbit: &[Rat]) -> Result<bool, InvLimError> {
    let mut q = p.clone();
    for (k, x) in orbit.iter().enumerate() {
        if k > 0 {
            q = apply_diagonal(sys, &q)?;
        }
        if q.depth() < level || q.coords[level] != *x {
            return Ok(false);
        }
    }
    Ok(true)
}

fn smallest_preimage(f: &PLMap, a: &Rat) -> Option<Rat> {
    for w in f.breakpoints().windows(2) {
        let ((x0, y0), (x1, y1)) = (&w[0], &w[1]);
        if y0 == a {
            return Some(x0.clone());
        }
        if (y0 < a && a <= y1) || (y1 <= a && a < y0) {
            return Some(x0 + (x1 - x0) * (a - y0) / (y1 - y0));
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagonalRow {
    /// `None` for the diagonal map itself, `Some(i)` for the component `ψ_i`.
    pub level: Option<usize>,
    pub n: usize,
    pub eps: f64,
    pub points: usize,
    pub count: Count,
    pub estimate: f64,
    pub tail_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagonalEstimate {
    pub rows: Vec<DiagonalRow>,
}

impl DiagonalEstimate {
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["level", "n", "eps", "estimate", "tail_bound"])?;
        for r in &self.rows {
            wr.write_record([
                r.level.map(|l| l.to_string()).unwrap_or_else(|| "diag".into()),
                r.n.to_string(),
                r.eps.to_string(),
                r.estimate.to_string(),
                r.tail_bound.to_string(),
            ])?;
        }
        wr.flush()
    }

    /// The diagonal-map estimate at the largest `n`.
    pub fn diagonal_estimate(&self) -> Option<f64> {
        self.rows.iter().rfind(|r| r.level.is_none()).map(|r| r.estimate)
    }
}

/// How grid points become points of the inverse limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSeed {
    /// Grid value at coordinate 0, deeper coordinates by smallest preimage.
    #[default]
    Base,
    /// Grid value at the deepest coordinate, pushed forward by the bonding maps.
    Top,
}

/// Orbits of length `n` of the diagonal map from grid-seeded points. Each time step
/// holds coordinates `0..=depth` scaled by `2^{-i}`, so the block distance is the
/// truncated metric.
pub fn diagonal_trajectories(sys: &DiagonalSystem, depth: usize, n: usize, grid: &Rat, seed: GridSeed) -> Result<Trajectories, InvLimError> {
    let top = depth + n - 1;
    let mut rows = Vec::new();
    let mut x = Rat::zero();
    while x <= Rat::one() {
        let mut p = match seed {
            GridSeed::Base => TruncatedPoint::from_base(sys, x.clone(), top)?,
            GridSeed::Top => TruncatedPoint::from_top(sys, x.clone(), top)?,
        };
        let mut row = Vec::with_capacity(n * (depth + 1));
        for step in 0..n {
            if step > 0 {
                p = apply_diagonal(sys, &p)?;
            }
            row.extend(p.coords[..=depth].iter().enumerate().map(|(i, c)| c.to_f64() / 2f64.powi(i as i32)));
        }
        rows.push(row);
        x = &x + grid;
    }
    Ok(Trajectories::with_blocks(rows, depth + 1))
}

/// Parameters of `entropy_estimate_diagonal`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalParams {
    pub depth: usize,
    pub n_max: usize,
    pub eps: f64,
    pub grid: Rat,
    #[serde(default)]
    pub seed: GridSeed,
    /// Level of the component estimated alongside, if any.
    pub psi_level: Option<usize>,
    /// Component estimates stop at the first `n` whose orbit count exceeds this.
    pub orbit_cap: usize,
}

impl DiagonalParams {
    pub fn new(depth: usize, n_max: usize, eps: f64, grid: Rat) -> DiagonalParams {
        DiagonalParams { depth, n_max, eps, grid, seed: GridSeed::Base, psi_level: None, orbit_cap: 20_000 }
    }
}

/// Separated-set estimates `(1/n) log s` for the diagonal map, with estimates for a
/// component on grid orbits alongside.
pub fn entropy_estimate_diagonal(sys: &DiagonalSystem, p: &DiagonalParams) -> Result<DiagonalEstimate, InvLimError> {
    let DiagonalParams { depth, n_max, eps, ref grid, seed, psi_level, orbit_cap } = *p;
    let mut rows = Vec::new();
    let tail = 2f64.powi(-(depth as i32));
    for n in 1..=n_max {
        let t = diagonal_trajectories(sys, depth, n, grid, seed)?;
        let count = separated_count(&t, eps);
        rows.push(DiagonalRow {
            level: None,
            n,
            eps,
            points: t.len(),
            count,
            estimate: (count.value.max(1) as f64).ln() / n as f64,
            tail_bound: tail,
        });
    }
    if let Some(i) = psi_level {
        let psi = psi_component(sys, i)?;
        for n in 1..=n_max {
            let orbits = match enumerate_orbits_capped(&psi, n, grid, orbit_cap) {
                Ok(o) => o,
                Err(EntropyError::OrbitCap { .. }) => break,
                Err(e) => return Err(e.into()),
            };
            let t = Trajectories::from_orbits(&orbits);
            let count = separated_count(&t, eps);
            rows.push(DiagonalRow {
                level: Some(i),
                n,
                eps,
                points: t.len(),
                count,
                estimate: (count.value.max(1) as f64).ln() / n as f64,
                tail_bound: 0.0,
            });
        }
    }
    Ok(DiagonalEstimate { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockBound {
    pub block: u32,
    /// `|M_{k_b}|` for the pair restricted to the block.
    pub count: usize,
    /// `(1/k_b) log |M_{k_b}|`
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppendixLevel {
    /// Level `k`; the component is `g_k ∘ f_k⁻¹`.
    pub k: usize,
    pub n_k: u32,
    /// `max{log s, log n_k}`
    pub target: f64,
    pub horseshoe: Option<HorseshoeCert>,
    /// `log N` of the certified horseshoe.
    pub lower: f64,
    /// Best iterate bound using only the first block.
    pub first_block_lower: f64,
    pub blocks: Vec<BlockBound>,
    pub upper: f64,
    /// `target + log(k_b + 1) / k_b`
    pub allowance: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiftWitness {
    pub level: usize,
    pub orbit: Vec<Rat>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppendixReport {
    pub n_seq: Vec<u32>,
    pub s: Rat,
    pub k_b: usize,
    pub compat: CompatReport,
    pub lifting_condition: CompatReport,
    pub levels: Vec<AppendixLevel>,
    /// A grid orbit of some component that does not lift, if one was found.
    pub lift_failure: Option<LiftWitness>,
    pub ok: bool,
}

/// Grid orbits of length `n` of `rel`, through every point of each fiber.
fn fiber_orbits(rel: &PLRelation, start: &Rat, n: usize) -> Vec<Vec<Rat>> {
    let mut out = vec![vec![start.clone()]];
    for _ in 1..n {
        out = out
            .into_iter()
            .flat_map(|o| {
                let last = o.last().expect("nonempty").clone();
                rel.evaluate_at(&last).points().into_iter().map(move |y| {
                    let mut o2 = o.clone();
                    o2.push(y);
                    o2
                })
            })
            .collect();
    }
    out
}

/// First orbit of length 3 (levels `0..levels`, starts on `grid`) that fails to lift.
pub fn find_lift_failure(sys: &DiagonalSystem, levels: usize, grid: &Rat) -> Result<Option<LiftWitness>, InvLimError> {
    for level in 0..levels {
        let psi = psi_component(sys, level)?;
        let mut x = Rat::zero();
        while x <= Rat::one() {
            for orbit in fiber_orbits(&psi, &x, 3) {
                match lift_orbit(sys, level, &orbit, level + 2) {
                    Ok(_) => {}
                    Err(e @ InvLimError::Lift { .. }) => return Ok(Some(LiftWitness { level, orbit, error: e.to_string() })),
                    Err(e) => return Err(e),
                }
            }
            x = &x + grid;
        }
    }
    Ok(None)
}

/// Compatibility, per-level horseshoe and blockwise branch bounds, and a lifting
/// failure for the block-assembled system.
pub fn appendix_report(n_seq: &[u32], s: &Rat, k_max: usize, k_b: usize, grid: &Rat) -> Result<AppendixReport, InvLimError> {
    if k_max == 0 || k_b == 0 {
        return Err(FamilyError::Param("k_max and k_b must be positive".into()).into());
    }
    let sys = DiagonalSystem::appendix(n_seq, s, k_max + 2)?;
    let compat = check_diagonal_compat(&sys, k_max + 1)?;
    let lifting_condition = check_lifting_condition(&sys, k_max + 1)?;
    let log_s = s.to_f64().ln();
    let mut levels = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let (f, g) = (sys.bonding(k)?, sys.diagonal(k)?);
        let n_k = n_seq[(k - 1) % n_seq.len()];
        let target = log_s.max((n_k as f64).ln());
        let horseshoe = largest_horseshoe(&param_graph(f, g)?);
        let lower = horseshoe.as_ref().map_or(0.0, |c| (c.n as f64).ln());
        let (a, b) = block_bounds(1);
        let first_block_lower = param_horseshoe_bound(&f.extract(&a, &b)?, &g.extract(&a, &b)?, k_b)?.best;
        // Above block k+2 both maps are the identity.
        let mut blocks = Vec::new();
        for blk in 1..=(k as u32 + 2) {
            let (a, b) = block_bounds(blk);
            let counts = branch_counts(&f.extract(&a, &b)?, &g.extract(&a, &b)?, k_b).map_err(EntropyError::from)?;
            let last = counts.last().expect("k_b > 0");
            blocks.push(BlockBound { block: blk, count: last.count, bound: last.log_growth });
        }
        let upper = blocks.iter().map(|b| b.bound).fold(0.0, f64::max);
        let allowance = target + ((k_b + 1) as f64).ln() / k_b as f64;
        let ok = lower >= (n_k as f64).ln() - 1e-12 && lower >= log_s - 1e-12 && upper <= allowance;
        levels.push(AppendixLevel { k, n_k, target, horseshoe, lower, first_block_lower, blocks, upper, allowance, ok });
    }
    let lift_failure = find_lift_failure(&sys, k_max, grid)?;
    let ok = compat.ok && levels.iter().all(|l| l.ok) && lift_failure.is_some();
    Ok(AppendixReport { n_seq: n_seq.to_vec(), s: s.clone(), k_b, compat, lifting_condition, levels, lift_failure, ok })
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
    fn compat_of_standard_systems() {
        assert!(check_diagonal_compat(&DiagonalSystem::constant(&t(2), &t(2), 6), 6).unwrap().ok);
        assert!(check_diagonal_compat(&DiagonalSystem::constant(&t(2), &t(3), 6), 6).unwrap().ok);
        assert!(check_diagonal_compat(&DiagonalSystem::shift(&t(2), 6).unwrap(), 6).unwrap().ok);
        let bad = DiagonalSystem::new(vec![t(2), t(2), t(2)], vec![t(3), t(2), t(3)]).unwrap();
        assert_eq!(check_diagonal_compat(&bad, 3).unwrap().failed, vec![1, 2]);
    }

    #[test]
    fn apply_diagonal_keeps_consistency() {
        let sys = DiagonalSystem::constant(&t(2), &t(3), 8);
        let p = TruncatedPoint::from_top(&sys, r(3, 7), 6).unwrap();
        p.check(&sys).unwrap();
        let q = apply_diagonal(&sys, &p).unwrap();
        assert_eq!(q.depth(), 5);
        q.check(&sys).unwrap();
        let one = TruncatedPoint { coords: vec![r(0, 1), r(1, 3)] };
        assert_eq!(apply_diagonal(&sys, &one).unwrap().coords, vec![t(3).eval(&r(1, 3)).unwrap()]);
        assert!(apply_diagonal(&sys, &TruncatedPoint { coords: vec![r(0, 1)] }).is_err());
    }

    #[test]
    fn shift_moves_coordinates() {
        let sys = DiagonalSystem::shift(&t(2), 8).unwrap();
        let p = TruncatedPoint::from_base(&sys, r(1, 5), 4).unwrap();
        let q = apply_diagonal(&sys, &p).unwrap();
        assert_eq!(q.coords[0], r(2, 5));
        assert_eq!(q.coords[1..], p.coords[..3]);
    }

    #[test]
    fn fixed_point_is_fixed() {
        let sys = DiagonalSystem::constant(&t(2), &t(3), 8);
        let p = TruncatedPoint { coords: vec![r(0, 1); 5] };
        p.check(&sys).unwrap();
        assert_eq!(apply_diagonal(&sys, &p).unwrap(), p.truncate(3));
    }

    #[test]
    fn metric_basics() {
        let p = TruncatedPoint { coords: vec![r(1, 2), r(1, 4), r(1, 8)] };
        let mut q = p.clone();
        assert_eq!(truncated_metric(&p, &q).unwrap().value, 0.0);
        q.coords[0] = r(3, 4);
        let m = truncated_metric(&p, &q).unwrap();
        assert_eq!(m.value, 0.25);
        assert_eq!(m.tail, 0.25);
        let deep = TruncatedPoint { coords: vec![r(0, 1); 9] };
        assert_eq!(truncated_metric(&deep, &deep).unwrap().tail, 1.0 / 256.0);
        assert!(truncated_metric(&p, &deep).is_err());
    }

    #[test]
    fn lift_on_shift_and_commuting_pair() {
        let sh = DiagonalSystem::shift(&t(2), 8).unwrap();
        let orbit = [r(1, 5), r(2, 5)];
        let p = lift_orbit(&sh, 0, &orbit, 4).unwrap();
        assert_eq!(p, TruncatedPoint::from_base(&sh, r(1, 5), 4).unwrap());
        assert!(projects_onto(&sh, 0, &p, &orbit).unwrap());

        let sys = DiagonalSystem::constant(&t(2), &t(3), 8);
        let orbit = [r(1, 5), r(7, 10), r(19, 20)];
        let p = lift_orbit(&sys, 0, &orbit, 4).unwrap();
        p.check(&sys).unwrap();
        assert!(projects_onto(&sys, 0, &p, &orbit).unwrap());
        assert!(matches!(lift_orbit(&sys, 0, &[r(1, 5), r(1, 5)], 4), Err(InvLimError::NotAnOrbit { .. })));
    }

    #[test]
    fn lift_fails_on_block_system() {
        let sys = DiagonalSystem::appendix(&[2, 5, 2, 5], &r(2, 1), 6).unwrap();
        let err = lift_orbit(&sys, 0, &[r(5, 8), r(5, 8), r(2, 3)], 4).unwrap_err();
        assert_eq!(err, InvLimError::Lift { level: 2 });
        assert!(!check_lifting_condition(&sys, 3).unwrap().ok);
    }

    #[test]
    fn system_spec_round_trip() {
        let spec = SystemSpec::Constant { f: FamilySpec::parse_short("tent:2").unwrap(), g: FamilySpec::parse_short("tent:3").unwrap() };
        let js = serde_json::to_string(&spec).unwrap();
        let back: SystemSpec = serde_json::from_str(&js).unwrap();
        assert_eq!(back, spec);
        assert_eq!(back.build(3).unwrap(), DiagonalSystem::constant(&t(2), &t(3), 3));
    }
}
