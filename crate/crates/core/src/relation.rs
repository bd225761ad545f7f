//! Planar PL relations: closed subsets of the unit square stored as finite unions of
//! monotone arcs and axis-parallel segments.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::plmap::{compose, compose_in, merge_intervals, Interval, PLMap, PlError};
use crate::rat::Rat;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RelError {
    #[error("composition contains a two-dimensional piece {xs} x {zs}")]
    TwoDimensional { xs: Interval, zs: Interval },
    #[error("invalid arc: {0}")]
    InvalidArc(String),
    #[error(transparent)]
    Map(#[from] PlError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "inc")]
    Increasing,
    #[serde(rename = "dec")]
    Decreasing,
}

/// Graph of a PL homeomorphism from `dom` onto `ran`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MonotoneArc {
    pub dom: Interval,
    pub ran: Interval,
    pub homeo: PLMap,
    pub direction: Direction,
}

impl MonotoneArc {
    pub fn new(homeo: PLMap) -> Result<MonotoneArc, RelError> {
        if !homeo.is_strictly_monotone() {
            return Err(RelError::InvalidArc("homeomorphism is not strictly monotone".into()));
        }
        Ok(MonotoneArc::from_homeo(homeo))
    }

    pub(crate) fn from_homeo(homeo: PLMap) -> MonotoneArc {
        let (s, e) = (homeo.start(), homeo.end());
        let direction = if s.1 < e.1 { Direction::Increasing } else { Direction::Decreasing };
        MonotoneArc {
            dom: Interval { lo: s.0.clone(), hi: e.0.clone() },
            ran: Interval::span(s.1.clone(), e.1.clone()),
            homeo,
            direction,
        }
    }

    pub fn eval(&self, x: &Rat) -> Option<Rat> {
        self.dom.contains(x).then(|| self.homeo.eval_in(x))
    }

    /// The unique `x` with `homeo(x) = y`, for `y` in `ran`.
    pub fn preimage(&self, y: &Rat) -> Option<Rat> {
        if !self.ran.contains(y) {
            return None;
        }
        let b = self.homeo.breakpoints();
        let i = match self.direction {
            Direction::Increasing => b.partition_point(|(_, by)| by <= y),
            Direction::Decreasing => b.partition_point(|(_, by)| by >= y),
        };
        let i = i.clamp(1, b.len() - 1) - 1;
        let (x0, y0) = &b[i];
        let (x1, y1) = &b[i + 1];
        if y == y0 {
            return Some(x0.clone());
        }
        if y == y1 {
            return Some(x1.clone());
        }
        Some(x0 + (x1 - x0) * (y - y0) / (y1 - y0))
    }

    pub fn transpose(&self) -> MonotoneArc {
        let mut pts: Vec<(Rat, Rat)> = self.homeo.breakpoints().iter().map(|(x, y)| (y.clone(), x.clone())).collect();
        if self.direction == Direction::Decreasing {
            pts.reverse();
        }
        MonotoneArc {
            dom: self.ran.clone(),
            ran: self.dom.clone(),
            homeo: PLMap::from_sorted(pts),
            direction: self.direction,
        }
    }

    /// The arc restricted to the part lying over the nondegenerate x-interval `[lo,hi]`.
    pub fn restrict(&self, lo: &Rat, hi: &Rat) -> MonotoneArc {
        MonotoneArc::from_homeo(self.homeo.restrict_in(lo, hi))
    }

    /// `next ∘ self` over `Z = ran(self) ∩ dom(next)`, when `Z` has nonempty interior.
    pub fn then(&self, next: &MonotoneArc) -> Option<MonotoneArc> {
        let z = self.ran.overlap(&next.dom)?;
        let a = self.preimage(&z.lo).expect("z in range");
        let b = self.preimage(&z.hi).expect("z in range");
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let inner = self.homeo.restrict_in(&lo, &hi);
        Some(MonotoneArc::from_homeo(compose_in(&next.homeo, &inner)))
    }
}

/// One piece of a relation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arc {
    Monotone(MonotoneArc),
    Horizontal { dom: Interval, y: Rat },
    Vertical { x: Rat, ran: Interval },
}

impl Arc {
    pub fn x_range(&self) -> Interval {
        match self {
            Arc::Monotone(m) => m.dom.clone(),
            Arc::Horizontal { dom, .. } => dom.clone(),
            Arc::Vertical { x, .. } => Interval::point(x.clone()),
        }
    }

    pub fn y_range(&self) -> Interval {
        match self {
            Arc::Monotone(m) => m.ran.clone(),
            Arc::Horizontal { y, .. } => Interval::point(y.clone()),
            Arc::Vertical { ran, .. } => ran.clone(),
        }
    }

    pub fn transpose(&self) -> Arc {
        match self {
            Arc::Monotone(m) => Arc::Monotone(m.transpose()),
            Arc::Horizontal { dom, y } => Arc::Vertical { x: y.clone(), ran: dom.clone() },
            Arc::Vertical { x, ran } => Arc::Horizontal { dom: ran.clone(), y: x.clone() },
        }
    }

    /// `{y : (x,y) ∈ arc}`.
    pub fn fiber(&self, x: &Rat) -> Option<Interval> {
        match self {
            Arc::Monotone(m) => m.eval(x).map(Interval::point),
            Arc::Horizontal { dom, y } => dom.contains(x).then(|| Interval::point(y.clone())),
            Arc::Vertical { x: x0, ran } => (x0 == x).then(|| ran.clone()),
        }
    }

    /// Image of the set `i` under the arc.
    pub fn image(&self, i: &Interval) -> Option<Interval> {
        match self {
            Arc::Monotone(m) => {
                let j = m.dom.intersect(i)?;
                Some(Interval::span(m.homeo.eval_in(&j.lo), m.homeo.eval_in(&j.hi)))
            }
            Arc::Horizontal { dom, y } => dom.intersect(i).map(|_| Interval::point(y.clone())),
            Arc::Vertical { x, ran } => i.contains(x).then(|| ran.clone()),
        }
    }

    /// Vertices in increasing order (by x, then y).
    pub fn vertices(&self) -> Vec<(Rat, Rat)> {
        match self {
            Arc::Monotone(m) => m.homeo.breakpoints().to_vec(),
            Arc::Horizontal { dom, y } => vec![(dom.lo.clone(), y.clone()), (dom.hi.clone(), y.clone())],
            Arc::Vertical { x, ran } => vec![(x.clone(), ran.lo.clone()), (x.clone(), ran.hi.clone())],
        }
    }

    fn from_chain(pts: Vec<(Rat, Rat)>, kind: SegKind) -> Arc {
        match kind {
            SegKind::Horizontal => Arc::Horizontal {
                dom: Interval { lo: pts[0].0.clone(), hi: pts[pts.len() - 1].0.clone() },
                y: pts[0].1.clone(),
            },
            SegKind::Vertical => Arc::Vertical {
                x: pts[0].0.clone(),
                ran: Interval { lo: pts[0].1.clone(), hi: pts[pts.len() - 1].1.clone() },
            },
            _ => Arc::Monotone(MonotoneArc::from_homeo(PLMap::from_sorted(pts))),
        }
    }
}

/// A fiber of a relation: sorted disjoint closed intervals, points as degenerate intervals.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Fiber {
    pub parts: Vec<Interval>,
}

impl Fiber {
    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn contains(&self, y: &Rat) -> bool {
        self.parts.iter().any(|p| p.contains(y))
    }

    /// Number of points, or `None` when the fiber contains an interval.
    pub fn cardinality(&self) -> Option<usize> {
        self.parts.iter().all(|p| p.is_point()).then_some(self.parts.len())
    }

    /// The isolated points and the endpoints of interval parts.
    pub fn points(&self) -> Vec<Rat> {
        let mut out = Vec::new();
        for p in &self.parts {
            out.push(p.lo.clone());
            if !p.is_point() {
                out.push(p.hi.clone());
            }
        }
        out
    }
}

/// Finite union of arcs. Structural equality is not point-set equality; use [`rel_equals`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PLRelation {
    arcs: Vec<Arc>,
}

impl PLRelation {
    pub fn from_arcs(arcs: Vec<Arc>) -> PLRelation {
        PLRelation { arcs }
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn into_arcs(self) -> Vec<Arc> {
        self.arcs
    }

    pub fn len(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    pub fn diagonal() -> PLRelation {
        graph_of(&PLMap::identity())
    }

    pub fn union(&self, other: &PLRelation) -> PLRelation {
        let mut arcs = self.arcs.clone();
        arcs.extend(other.arcs.iter().cloned());
        PLRelation { arcs }
    }

    pub fn evaluate_at(&self, x: &Rat) -> Fiber {
        Fiber { parts: merge_intervals(self.arcs.iter().filter_map(|a| a.fiber(x)).collect()) }
    }

    pub fn image_of_interval(&self, i: &Interval) -> Vec<Interval> {
        merge_intervals(self.arcs.iter().filter_map(|a| a.image(i)).collect())
    }

    pub fn image_of_set(&self, set: &[Interval]) -> Vec<Interval> {
        merge_intervals(set.iter().flat_map(|i| self.image_of_interval(i)).collect())
    }

    /// All x-coordinates of stored arc vertices, sorted and deduplicated.
    pub fn stored_x_cuts(&self) -> Vec<Rat> {
        let mut v: Vec<Rat> = self.arcs.iter().flat_map(|a| a.vertices().into_iter().map(|p| p.0)).collect();
        v.sort();
        v.dedup();
        v
    }

    /// Maximal collinear segments, sorted. Two relations are equal as point sets exactly
    /// when these lists agree.
    pub fn segment_form(&self) -> Vec<Segment> {
        maximal_segments(self.arcs.iter().flat_map(arc_segments))
    }

    /// The unique decomposition into arcs that meet only at vertices: maximal segments
    /// split at every crossing and touching point, then chained through degree-two
    /// vertices whose two edges have the same kind.
    pub fn canonical(&self) -> PLRelation {
        canonical_from_segments(self.segment_form())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum SegKind {
    Increasing,
    Decreasing,
    Horizontal,
    Vertical,
}

/// A nondegenerate segment with `a < b` lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Segment {
    pub a: (Rat, Rat),
    pub b: (Rat, Rat),
}

impl Segment {
    fn new(p: (Rat, Rat), q: (Rat, Rat)) -> Segment {
        if p <= q {
            Segment { a: p, b: q }
        } else {
            Segment { a: q, b: p }
        }
    }

    fn kind(&self) -> SegKind {
        if self.a.0 == self.b.0 {
            SegKind::Vertical
        } else {
            match self.b.1.cmp(&self.a.1) {
                std::cmp::Ordering::Greater => SegKind::Increasing,
                std::cmp::Ordering::Less => SegKind::Decreasing,
                std::cmp::Ordering::Equal => SegKind::Horizontal,
            }
        }
    }

    fn y_lo_hi(&self) -> (&Rat, &Rat) {
        if self.a.1 <= self.b.1 {
            (&self.a.1, &self.b.1)
        } else {
            (&self.b.1, &self.a.1)
        }
    }

    fn contains_point(&self, p: &(Rat, Rat)) -> bool {
        let (ylo, yhi) = self.y_lo_hi();
        self.a.0 <= p.0 && p.0 <= self.b.0 && ylo <= &p.1 && &p.1 <= yhi
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Line {
    Vertical(Rat),
    Sloped(Rat, Rat),
}

fn line_of(s: &Segment) -> Line {
    if s.a.0 == s.b.0 {
        Line::Vertical(s.a.0.clone())
    } else {
        let m = (&s.b.1 - &s.a.1) / (&s.b.0 - &s.a.0);
        let c = &s.a.1 - &m * &s.a.0;
        Line::Sloped(m, c)
    }
}

fn arc_segments(a: &Arc) -> Vec<Segment> {
    a.vertices().windows(2).map(|w| Segment::new(w[0].clone(), w[1].clone())).collect()
}

fn maximal_segments(segs: impl Iterator<Item = Segment>) -> Vec<Segment> {
    let mut groups: HashMap<Line, Vec<Segment>> = HashMap::new();
    for s in segs {
        if s.a != s.b {
            groups.entry(line_of(&s)).or_default().push(s);
        }
    }
    let mut out = Vec::new();
    for (_, mut v) in groups {
        v.sort();
        let mut cur = v[0].clone();
        for s in v.into_iter().skip(1) {
            if s.a <= cur.b {
                if s.b > cur.b {
                    cur.b = s.b;
                }
            } else {
                out.push(std::mem::replace(&mut cur, s));
            }
        }
        out.push(cur);
    }
    out.sort();
    out
}

fn intersection(s: &Segment, ls: &Line, t: &Segment, lt: &Line) -> Option<(Rat, Rat)> {
    let p = match (ls, lt) {
        (Line::Vertical(_), Line::Vertical(_)) => return None,
        (Line::Vertical(x), Line::Sloped(m, c)) | (Line::Sloped(m, c), Line::Vertical(x)) => {
            (x.clone(), m * x + c)
        }
        (Line::Sloped(m1, c1), Line::Sloped(m2, c2)) => {
            if m1 == m2 {
                return None;
            }
            let x = (c2 - c1) / (m1 - m2);
            let y = m1 * &x + c1;
            (x, y)
        }
    };
    (s.contains_point(&p) && t.contains_point(&p)).then_some(p)
}

fn canonical_from_segments(segs: Vec<Segment>) -> PLRelation {
    let lines: Vec<Line> = segs.iter().map(line_of).collect();
    let mut cuts: Vec<Vec<(Rat, Rat)>> = segs.iter().map(|s| vec![s.a.clone(), s.b.clone()]).collect();
    // `segs` is sorted by left endpoint, so only segments starting before the current
    // one ends can meet it.
    for i in 0..segs.len() {
        for j in i + 1..segs.len() {
            if segs[j].a.0 > segs[i].b.0 {
                break;
            }
            if let Some(p) = intersection(&segs[i], &lines[i], &segs[j], &lines[j]) {
                cuts[i].push(p.clone());
                cuts[j].push(p);
            }
        }
    }
    let mut edges: Vec<Segment> = Vec::new();
    for mut c in cuts {
        c.sort();
        c.dedup();
        for w in c.windows(2) {
            edges.push(Segment { a: w[0].clone(), b: w[1].clone() });
        }
    }
    edges.sort();
    let mut incident: HashMap<&(Rat, Rat), Vec<usize>> = HashMap::new();
    for (i, e) in edges.iter().enumerate() {
        incident.entry(&e.a).or_default().push(i);
        incident.entry(&e.b).or_default().push(i);
    }
    let kinds: Vec<SegKind> = edges.iter().map(Segment::kind).collect();
    let mut next: Vec<Option<usize>> = vec![None; edges.len()];
    let mut has_prev = vec![false; edges.len()];
    for (i, e) in edges.iter().enumerate() {
        let inc = &incident[&e.b];
        if inc.len() == 2 {
            let j = if inc[0] == i { inc[1] } else { inc[0] };
            if edges[j].a == e.b && kinds[j] == kinds[i] {
                next[i] = Some(j);
                has_prev[j] = true;
            }
        }
    }
    let mut arcs = Vec::new();
    for i in 0..edges.len() {
        if has_prev[i] {
            continue;
        }
        let mut pts = vec![edges[i].a.clone(), edges[i].b.clone()];
        let mut cur = i;
        while let Some(j) = next[cur] {
            pts.push(edges[j].b.clone());
            cur = j;
        }
        arcs.push(Arc::from_chain(pts, kinds[i]));
    }
    arcs.sort();
    PLRelation { arcs }
}

/// True iff the two relations are the same subset of the square.
pub fn rel_equals(a: &PLRelation, b: &PLRelation) -> bool {
    a.segment_form() == b.segment_form()
}

/// `{(f(t), g(t)) : t}` split at the lap boundaries of both maps. Pieces where `f` is
/// constant become vertical segments, where `g` is constant horizontal ones; pieces where
/// both are constant are single points and are dropped.
pub fn param_graph(f: &PLMap, g: &PLMap) -> Result<PLRelation, RelError> {
    let (df, dg) = (f.domain(), g.domain());
    if df != dg {
        return Err(RelError::InvalidArc(format!("parameter domains differ: {df} vs {dg}")));
    }
    let mut ts: Vec<&Rat> = f.breakpoints().iter().chain(g.breakpoints()).map(|p| &p.0).collect();
    ts.sort();
    ts.dedup();
    let mut cuts: Vec<Rat> = f
        .laps()
        .into_iter()
        .chain(g.laps())
        .flat_map(|l| [l.dom.lo, l.dom.hi])
        .collect();
    cuts.sort();
    cuts.dedup();
    let pts: Vec<(Rat, Rat)> = ts.iter().map(|t| (f.eval_in(t), g.eval_in(t))).collect();
    let mut arcs = Vec::with_capacity(cuts.len());
    let mut start = 0usize;
    let mut end = 0usize;
    for c in cuts.iter().skip(1) {
        while ts[end] != c {
            end += 1;
        }
        let piece = &pts[start..=end];
        let (p, q) = (&piece[0], &piece[piece.len() - 1]);
        match (p.0 == q.0, p.1 == q.1) {
            (true, true) => {}
            (true, false) => arcs.push(Arc::Vertical { x: p.0.clone(), ran: Interval::span(p.1.clone(), q.1.clone()) }),
            (false, true) => arcs.push(Arc::Horizontal { dom: Interval::span(p.0.clone(), q.0.clone()), y: p.1.clone() }),
            (false, false) => {
                let mut v = piece.to_vec();
                if p.0 > q.0 {
                    v.reverse();
                }
                arcs.push(Arc::Monotone(MonotoneArc::from_homeo(PLMap::from_sorted(v))));
            }
        }
        start = end;
    }
    Ok(PLRelation { arcs })
}

/// The graph of `f`, one arc per lap; plateaus become horizontal segments.
pub fn graph_of(f: &PLMap) -> PLRelation {
    let d = f.domain();
    let id = PLMap::linear(d.lo.clone(), d.lo, d.hi.clone(), d.hi);
    param_graph(&id, f).expect("same domain")
}

pub fn inverse_rel(r: &PLRelation) -> PLRelation {
    PLRelation { arcs: r.arcs.iter().map(Arc::transpose).collect() }
}

fn compose_arcs(first: &Arc, second: &Arc, out: &mut Vec<Arc>) -> Result<(), RelError> {
    use Arc::*;
    match (first, second) {
        (Monotone(a), Monotone(b)) => {
            if let Some(c) = a.then(b) {
                out.push(Monotone(c));
            }
        }
        (Monotone(a), Horizontal { dom, y }) => {
            if let Some(z) = a.ran.overlap(dom) {
                let (p, q) = (a.preimage(&z.lo).expect("in range"), a.preimage(&z.hi).expect("in range"));
                out.push(Horizontal { dom: Interval::span(p, q), y: y.clone() });
            }
        }
        (Monotone(a), Vertical { x, ran }) => {
            if let Some(p) = a.preimage(x) {
                out.push(Vertical { x: p, ran: ran.clone() });
            }
        }
        (Horizontal { dom, y }, Monotone(b)) => {
            if let Some(z) = b.eval(y) {
                out.push(Horizontal { dom: dom.clone(), y: z });
            }
        }
        (Horizontal { dom, y }, Horizontal { dom: d2, y: z }) => {
            if d2.contains(y) {
                out.push(Horizontal { dom: dom.clone(), y: z.clone() });
            }
        }
        (Horizontal { dom, y }, Vertical { x, ran }) => {
            if x == y {
                return Err(RelError::TwoDimensional { xs: dom.clone(), zs: ran.clone() });
            }
        }
        (Vertical { x, ran }, Monotone(b)) => {
            if let Some(z) = ran.overlap(&b.dom) {
                let zs = Interval::span(b.homeo.eval_in(&z.lo), b.homeo.eval_in(&z.hi));
                out.push(Vertical { x: x.clone(), ran: zs });
            }
        }
        (Vertical { .. }, Horizontal { .. }) => {}
        (Vertical { x, ran }, Vertical { x: y, ran: zs }) => {
            if ran.contains(y) {
                out.push(Vertical { x: x.clone(), ran: zs.clone() });
            }
        }
    }
    Ok(())
}

/// Indexes arcs by x-range for overlap queries.
pub(crate) struct XIndex<'a> {
    arcs: Vec<(&'a Arc, Interval)>,
    max_len: Rat,
}

impl<'a> XIndex<'a> {
    pub(crate) fn new(arcs: &'a [Arc]) -> XIndex<'a> {
        let mut v: Vec<(&Arc, Interval)> = arcs.iter().map(|a| (a, a.x_range())).collect();
        v.sort_by(|p, q| p.1.lo.cmp(&q.1.lo));
        let max_len = v.iter().map(|p| p.1.len()).max().unwrap_or_else(Rat::zero);
        XIndex { arcs: v, max_len }
    }

    /// Arcs whose x-range meets `[lo,hi]`, in index order.
    pub(crate) fn meeting(&self, i: &Interval) -> impl Iterator<Item = &'a Arc> + '_ {
        let from = &i.lo - &self.max_len;
        let start = self.arcs.partition_point(|p| p.1.lo < from);
        let hi = i.hi.clone();
        let lo = i.lo.clone();
        self.arcs[start..]
            .iter()
            .take_while(move |p| p.1.lo <= hi)
            .filter(move |p| p.1.hi >= lo)
            .map(|p| p.0)
    }
}

/// `s ∘ r = {(x,z) : (x,y) ∈ r, (y,z) ∈ s}`, canonicalized. Isolated points produced by
/// pieces meeting in a single point are dropped.
pub fn compose_rel(s: &PLRelation, r: &PLRelation) -> Result<PLRelation, RelError> {
    let idx = XIndex::new(&s.arcs);
    let mut out = Vec::new();
    for a in &r.arcs {
        for b in idx.meeting(&a.y_range()) {
            compose_arcs(a, b, &mut out)?;
        }
    }
    Ok(PLRelation { arcs: out }.canonical())
}

/// The two sides of the strong-commutation identity `g∘f⁻¹ = f⁻¹∘g`.
#[derive(Debug, Clone, Serialize)]
pub struct CommuteReport {
    pub holds: bool,
    /// `g ∘ f⁻¹`
    pub left: PLRelation,
    /// `f⁻¹ ∘ g`
    pub right: PLRelation,
}

pub fn commutation_witness(f: &PLMap, g: &PLMap) -> Result<CommuteReport, RelError> {
    let gf = graph_of(g);
    let finv = inverse_rel(&graph_of(f));
    let left = compose_rel(&gf, &finv)?;
    let right = compose_rel(&finv, &gf)?;
    Ok(CommuteReport { holds: rel_equals(&left, &right), left, right })
}

pub fn strongly_commutes(f: &PLMap, g: &PLMap) -> Result<bool, RelError> {
    commutation_witness(f, g).map(|r| r.holds)
}

pub fn commutes(f: &PLMap, g: &PLMap) -> Result<bool, RelError> {
    Ok(compose(f, g)? == compose(g, f)?)
}

/// Number of points over `x`, or `None` for an interval fiber.
pub fn fiber_cardinality_rel(r: &PLRelation, x: &Rat) -> Option<usize> {
    r.evaluate_at(x).cardinality()
}

#[derive(Serialize, Deserialize)]
struct ArcRepr {
    dom: (Rat, Rat),
    ran: (Rat, Rat),
    direction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    homeo: Option<PLMap>,
}

impl From<&Arc> for ArcRepr {
    fn from(a: &Arc) -> ArcRepr {
        let (xr, yr) = (a.x_range(), a.y_range());
        let (direction, homeo) = match a {
            Arc::Monotone(m) => (
                match m.direction {
                    Direction::Increasing => "inc",
                    Direction::Decreasing => "dec",
                },
                Some(m.homeo.clone()),
            ),
            Arc::Horizontal { .. } => ("horizontal", None),
            Arc::Vertical { .. } => ("vertical", None),
        };
        ArcRepr { dom: (xr.lo, xr.hi), ran: (yr.lo, yr.hi), direction: direction.into(), homeo }
    }
}

impl TryFrom<ArcRepr> for Arc {
    type Error = String;

    fn try_from(r: ArcRepr) -> Result<Arc, String> {
        let dom = Interval::new(r.dom.0, r.dom.1).map_err(|e| e.to_string())?;
        let ran = Interval::new(r.ran.0, r.ran.1).map_err(|e| e.to_string())?;
        let arc = match r.direction.as_str() {
            "inc" | "dec" => {
                let h = r.homeo.ok_or("monotone arc without homeo")?;
                let m = MonotoneArc::new(h).map_err(|e| e.to_string())?;
                let want = if r.direction == "inc" { Direction::Increasing } else { Direction::Decreasing };
                if m.dom != dom || m.ran != ran || m.direction != want {
                    return Err("arc fields disagree with homeo".into());
                }
                Arc::Monotone(m)
            }
            "horizontal" if ran.is_point() && !dom.is_point() => Arc::Horizontal { dom, y: ran.lo },
            "vertical" if dom.is_point() && !ran.is_point() => Arc::Vertical { x: dom.lo, ran },
            other => return Err(format!("bad arc direction or shape: {other}")),
        };
        Ok(arc)
    }
}

impl Serialize for PLRelation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Out {
            arcs: Vec<ArcRepr>,
        }
        Out { arcs: self.arcs.iter().map(ArcRepr::from).collect() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PLRelation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct In {
            arcs: Vec<ArcRepr>,
        }
        let raw = In::deserialize(d)?;
        let arcs = raw
            .arcs
            .into_iter()
            .map(Arc::try_from)
            .collect::<Result<Vec<_>, _>>()
            .map_err(serde::de::Error::custom)?;
        Ok(PLRelation { arcs })
    }
}
