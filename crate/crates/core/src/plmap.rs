//! Piecewise-linear maps on subintervals of `[0,1]`, stored as breakpoints.

use serde::{Deserialize, Serialize};

use crate::rat::Rat;

pub const DEFAULT_BREAKPOINT_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlError {
    #[error("{0}")]
    Invalid(String),
    #[error("point {x} outside domain [{lo}, {hi}]")]
    Domain { x: Rat, lo: Rat, hi: Rat },
    #[error("cannot compose: range [{rlo}, {rhi}] not inside domain [{dlo}, {dhi}]")]
    Compose { rlo: Rat, rhi: Rat, dlo: Rat, dhi: Rat },
    #[error("not a homeomorphism of [0,1]: {0}")]
    Homeomorphism(String),
    #[error("breakpoint cap {cap} exceeded at iterate {at}")]
    BreakpointCap { cap: usize, at: usize, partial: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Interval {
    pub lo: Rat,
    pub hi: Rat,
}

impl Interval {
    pub fn new(lo: Rat, hi: Rat) -> Result<Interval, PlError> {
        if lo > hi || lo.is_negative() || hi > Rat::one() {
            return Err(PlError::Invalid(format!("bad interval [{lo}, {hi}]")));
        }
        Ok(Interval { lo, hi })
    }

    /// Builds an interval from two endpoints in either order, without the unit-square check.
    pub fn span(a: Rat, b: Rat) -> Interval {
        if a <= b {
            Interval { lo: a, hi: b }
        } else {
            Interval { lo: b, hi: a }
        }
    }

    pub fn unit() -> Interval {
        Interval { lo: Rat::zero(), hi: Rat::one() }
    }

    pub fn point(x: Rat) -> Interval {
        Interval { lo: x.clone(), hi: x }
    }

    pub fn len(&self) -> Rat {
        &self.hi - &self.lo
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, x: &Rat) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn contains_interval(&self, o: &Interval) -> bool {
        self.lo <= o.lo && o.hi <= self.hi
    }

    pub fn intersect(&self, o: &Interval) -> Option<Interval> {
        let lo = if self.lo >= o.lo { &self.lo } else { &o.lo };
        let hi = if self.hi <= o.hi { &self.hi } else { &o.hi };
        (lo <= hi).then(|| Interval { lo: lo.clone(), hi: hi.clone() })
    }

    /// Intersection with nonempty interior.
    pub fn overlap(&self, o: &Interval) -> Option<Interval> {
        self.intersect(o).filter(|i| !i.is_point())
    }

    pub fn disjoint(&self, o: &Interval) -> bool {
        self.hi < o.lo || o.hi < self.lo
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Merges a list of intervals into sorted disjoint components.
pub fn merge_intervals(mut v: Vec<Interval>) -> Vec<Interval> {
    v.sort();
    let mut out: Vec<Interval> = Vec::with_capacity(v.len());
    for i in v {
        match out.last_mut() {
            Some(last) if i.lo <= last.hi => {
                if i.hi > last.hi {
                    last.hi = i.hi;
                }
            }
            _ => out.push(i),
        }
    }
    out
}

/// True if every component of `inner` lies inside some component of `outer`.
/// Both inputs must be merged (sorted, disjoint).
pub fn covers(outer: &[Interval], inner: &[Interval]) -> bool {
    let mut j = 0;
    for i in inner {
        while j < outer.len() && outer[j].hi < i.lo {
            j += 1;
        }
        if j == outer.len() || !outer[j].contains_interval(i) {
            return false;
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Trend {
    Down,
    Flat,
    Up,
}

impl Trend {
    fn of(dy: &Rat) -> Trend {
        match dy.signum() {
            1 => Trend::Up,
            -1 => Trend::Down,
            _ => Trend::Flat,
        }
    }
}

/// A maximal piece of monotonicity: `[x0, x1]` with a fixed trend.
#[derive(Debug, Clone, PartialEq)]
pub struct Lap {
    pub dom: Interval,
    pub image: Interval,
    pub trend: Trend,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct PLMap {
    breakpoints: Vec<(Rat, Rat)>,
}

fn collinear(a: &(Rat, Rat), b: &(Rat, Rat), c: &(Rat, Rat)) -> bool {
    (&b.1 - &a.1) * (&c.0 - &b.0) == (&c.1 - &b.1) * (&b.0 - &a.0)
}

fn canonical(pts: Vec<(Rat, Rat)>) -> Vec<(Rat, Rat)> {
    let mut out: Vec<(Rat, Rat)> = Vec::with_capacity(pts.len());
    for p in pts {
        if let Some(last) = out.last() {
            if last.0 == p.0 {
                continue;
            }
        }
        while out.len() >= 2 && collinear(&out[out.len() - 2], &out[out.len() - 1], &p) {
            out.pop();
        }
        out.push(p);
    }
    out
}

impl PLMap {
    pub fn new(pts: Vec<(Rat, Rat)>) -> Result<PLMap, PlError> {
        if pts.len() < 2 {
            return Err(PlError::Invalid("need at least two breakpoints".into()));
        }
        let zero = Rat::zero();
        let one = Rat::one();
        for w in pts.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(PlError::Invalid(format!(
                    "x-coordinates not strictly increasing at {}",
                    w[1].0
                )));
            }
        }
        for (x, y) in &pts {
            if x < &zero || x > &one || y < &zero || y > &one {
                return Err(PlError::Invalid(format!("breakpoint ({x}, {y}) outside unit square")));
            }
        }
        Ok(PLMap { breakpoints: canonical(pts) })
    }

    /// Trusted constructor; `pts` must satisfy the invariants already (merging is still applied).
    pub(crate) fn from_sorted(pts: Vec<(Rat, Rat)>) -> PLMap {
        debug_assert!(pts.len() >= 2);
        debug_assert!(pts.windows(2).all(|w| w[0].0 < w[1].0));
        PLMap { breakpoints: canonical(pts) }
    }

    pub fn from_ints(pts: &[(i64, i64, i64, i64)]) -> Result<PLMap, PlError> {
        PLMap::new(pts.iter().map(|&(a, b, c, d)| (Rat::new(a, b), Rat::new(c, d))).collect())
    }

    pub fn identity() -> PLMap {
        PLMap::from_sorted(vec![(Rat::zero(), Rat::zero()), (Rat::one(), Rat::one())])
    }

    /// The linear map from `(x0,y0)` to `(x1,y1)`.
    pub fn linear(x0: Rat, y0: Rat, x1: Rat, y1: Rat) -> PLMap {
        PLMap::from_sorted(vec![(x0, y0), (x1, y1)])
    }

    pub fn breakpoints(&self) -> &[(Rat, Rat)] {
        &self.breakpoints
    }

    pub fn into_breakpoints(self) -> Vec<(Rat, Rat)> {
        self.breakpoints
    }

    pub fn domain(&self) -> Interval {
        Interval {
            lo: self.breakpoints[0].0.clone(),
            hi: self.breakpoints[self.breakpoints.len() - 1].0.clone(),
        }
    }

    pub fn range(&self) -> Interval {
        let mut lo = &self.breakpoints[0].1;
        let mut hi = lo;
        for (_, y) in &self.breakpoints {
            if y < lo {
                lo = y;
            }
            if y > hi {
                hi = y;
            }
        }
        Interval { lo: lo.clone(), hi: hi.clone() }
    }

    pub fn start(&self) -> &(Rat, Rat) {
        &self.breakpoints[0]
    }

    pub fn end(&self) -> &(Rat, Rat) {
        &self.breakpoints[self.breakpoints.len() - 1]
    }

    /// Index `i` such that `x` lies in segment `[x_i, x_{i+1}]`.
    fn segment_of(&self, x: &Rat) -> usize {
        let n = self.breakpoints.len();
        let i = self.breakpoints.partition_point(|(bx, _)| bx <= x);
        i.clamp(1, n - 1) - 1
    }

    pub fn eval(&self, x: &Rat) -> Result<Rat, PlError> {
        let d = self.domain();
        if !d.contains(x) {
            return Err(PlError::Domain { x: x.clone(), lo: d.lo, hi: d.hi });
        }
        Ok(self.eval_in(x))
    }

    /// Evaluation without the domain check.
    pub(crate) fn eval_in(&self, x: &Rat) -> Rat {
        let i = self.segment_of(x);
        let (x0, y0) = &self.breakpoints[i];
        let (x1, y1) = &self.breakpoints[i + 1];
        if x == x0 {
            return y0.clone();
        }
        if x == x1 {
            return y1.clone();
        }
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    pub fn slopes(&self) -> Vec<Rat> {
        self.breakpoints
            .windows(2)
            .map(|w| (&w[1].1 - &w[0].1) / (&w[1].0 - &w[0].0))
            .collect()
    }

    /// Maximal pieces of constant trend; a plateau is its own lap.
    pub fn laps(&self) -> Vec<Lap> {
        let mut laps: Vec<Lap> = Vec::new();
        let mut start = 0usize;
        let n = self.breakpoints.len();
        let trend_at = |i: usize| Trend::of(&(&self.breakpoints[i + 1].1 - &self.breakpoints[i].1));
        let mut cur = trend_at(0);
        for i in 1..n {
            let next = if i + 1 < n { Some(trend_at(i)) } else { None };
            if next != Some(cur) {
                let (a, b) = (&self.breakpoints[start], &self.breakpoints[i]);
                laps.push(Lap {
                    dom: Interval { lo: a.0.clone(), hi: b.0.clone() },
                    image: Interval::span(a.1.clone(), b.1.clone()),
                    trend: cur,
                });
                start = i;
                if let Some(t) = next {
                    cur = t;
                }
            }
        }
        laps
    }

    pub fn lap_count(&self) -> usize {
        let n = self.breakpoints.len();
        let mut count = 1;
        let mut prev = Trend::of(&(&self.breakpoints[1].1 - &self.breakpoints[0].1));
        for i in 1..n - 1 {
            let t = Trend::of(&(&self.breakpoints[i + 1].1 - &self.breakpoints[i].1));
            if t != prev {
                count += 1;
                prev = t;
            }
        }
        count
    }

    /// Interior points where the trend changes. Plateaus contribute both endpoints.
    pub fn critical_points(&self) -> Vec<Rat> {
        let laps = self.laps();
        laps.iter().skip(1).map(|l| l.dom.lo.clone()).collect()
    }

    pub fn is_strictly_monotone(&self) -> bool {
        let laps = self.laps();
        laps.len() == 1 && laps[0].trend != Trend::Flat
    }

    /// Every lap maps onto `[0,1]` and the domain is `[0,1]`.
    pub fn is_open_onto(&self) -> bool {
        if self.domain() != Interval::unit() {
            return false;
        }
        self.laps().iter().all(|l| l.image == Interval::unit())
    }

    /// `self ∘ inner`.
    pub fn after(&self, inner: &PLMap) -> Result<PLMap, PlError> {
        compose(self, inner)
    }

    pub fn restrict(&self, dom: &Interval) -> Result<PLMap, PlError> {
        let d = self.domain();
        if !d.contains_interval(dom) || dom.is_point() {
            return Err(PlError::Invalid(format!("cannot restrict {d} to {dom}")));
        }
        Ok(self.restrict_in(&dom.lo, &dom.hi))
    }

    pub(crate) fn restrict_in(&self, lo: &Rat, hi: &Rat) -> PLMap {
        let mut pts = vec![(lo.clone(), self.eval_in(lo))];
        for (x, y) in &self.breakpoints {
            if x > lo && x < hi {
                pts.push((x.clone(), y.clone()));
            }
        }
        pts.push((hi.clone(), self.eval_in(hi)));
        PLMap { breakpoints: pts }
    }

    /// Inverse of a strictly monotone map, as a map on its range.
    pub fn inverse(&self) -> Result<PLMap, PlError> {
        if !self.is_strictly_monotone() {
            return Err(PlError::Homeomorphism("map is not strictly monotone".into()));
        }
        let mut pts: Vec<(Rat, Rat)> = self.breakpoints.iter().map(|(x, y)| (y.clone(), x.clone())).collect();
        if pts[0].0 > pts[1].0 {
            pts.reverse();
        }
        Ok(PLMap { breakpoints: pts })
    }

    /// Applies `h` to both coordinates' frames: returns `L ∘ self ∘ L⁻¹` where `L` is affine
    /// from `[0,1]` onto `[a,b]`. Used for block embeddings.
    pub fn embed(&self, a: &Rat, b: &Rat) -> PLMap {
        let w = b - a;
        PLMap {
            breakpoints: self
                .breakpoints
                .iter()
                .map(|(x, y)| (a + &w * x, a + &w * y))
                .collect(),
        }
    }

    /// The inverse of `embed`: the copy of `self` restricted to `[a,b]`, rescaled to `[0,1]`.
    pub fn extract(&self, a: &Rat, b: &Rat) -> Result<PLMap, PlError> {
        let sub = self.restrict(&Interval::span(a.clone(), b.clone()))?;
        let w = b - a;
        let pts: Vec<(Rat, Rat)> = sub
            .breakpoints
            .iter()
            .map(|(x, y)| ((x - a) / &w, (y - a) / &w))
            .collect();
        PLMap::new(pts)
    }
}

/// `f ∘ g`: exact, canonical.
pub fn compose(f: &PLMap, g: &PLMap) -> Result<PLMap, PlError> {
    let r = g.range();
    let d = f.domain();
    if !d.contains_interval(&r) {
        return Err(PlError::Compose { rlo: r.lo, rhi: r.hi, dlo: d.lo, dhi: d.hi });
    }
    Ok(compose_in(f, g))
}

pub(crate) fn compose_in(f: &PLMap, g: &PLMap) -> PLMap {
    let gb = &g.breakpoints;
    let fb = &f.breakpoints;
    let mut pts: Vec<(Rat, Rat)> = Vec::with_capacity(gb.len() + fb.len());
    pts.push((gb[0].0.clone(), f.eval_in(&gb[0].1)));
    for w in gb.windows(2) {
        let (x0, y0) = &w[0];
        let (x1, y1) = &w[1];
        if y0 != y1 {
            let (lo, hi) = if y0 < y1 { (y0, y1) } else { (y1, y0) };
            let a = fb.partition_point(|(bx, _)| bx <= lo);
            let b = fb.partition_point(|(bx, _)| bx < hi);
            let scale = (x1 - x0) / (y1 - y0);
            let mut mids: Vec<(Rat, Rat)> = fb[a..b]
                .iter()
                .map(|(bx, by)| (x0 + (bx - y0) * &scale, by.clone()))
                .collect();
            if y0 > y1 {
                mids.reverse();
            }
            pts.extend(mids);
        }
        pts.push((x1.clone(), f.eval_in(y1)));
    }
    PLMap { breakpoints: canonical(pts) }
}

/// `f^k` for a self-map; errors on a non-invariant domain or when the cap is exceeded.
pub fn iterate(f: &PLMap, k: usize) -> Result<PLMap, PlError> {
    iterate_capped(f, k, DEFAULT_BREAKPOINT_CAP)
}

pub fn iterate_capped(f: &PLMap, k: usize, cap: usize) -> Result<PLMap, PlError> {
    if k == 0 {
        let d = f.domain();
        return Ok(PLMap::linear(d.lo.clone(), d.lo, d.hi.clone(), d.hi));
    }
    if !f.domain().contains_interval(&f.range()) {
        return Err(compose(f, f).unwrap_err());
    }
    let mut acc = f.clone();
    for i in 1..k {
        acc = compose_in(f, &acc);
        if acc.breakpoints.len() > cap {
            return Err(PlError::BreakpointCap { cap, at: i + 1, partial: Vec::new() });
        }
    }
    Ok(acc)
}

pub fn eval(f: &PLMap, x: &Rat) -> Result<Rat, PlError> {
    f.eval(x)
}

pub fn critical_points(f: &PLMap) -> Vec<Rat> {
    f.critical_points()
}

pub fn lap_count(f: &PLMap) -> usize {
    f.lap_count()
}

pub fn map_equals(f: &PLMap, g: &PLMap) -> bool {
    f == g
}

pub fn is_open_onto(f: &PLMap) -> bool {
    f.is_open_onto()
}

/// `h⁻¹ ∘ f ∘ h` for a PL homeomorphism `h` of `[0,1]`.
pub fn conjugate(h: &PLMap, f: &PLMap) -> Result<PLMap, PlError> {
    if h.domain() != Interval::unit() || h.range() != Interval::unit() || !h.is_strictly_monotone() {
        return Err(PlError::Homeomorphism("expected a strictly monotone map of [0,1] onto itself".into()));
    }
    let hinv = h.inverse()?;
    let fh = compose(f, h)?;
    compose(&hinv, &fh)
}

/// Result of the lap-growth entropy computation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LapGrowth {
    /// `(1/n) log(lap_count(f^n) - 1)` for `n = 1..=n_max` (0 when `f^n` is monotone).
    pub terms: Vec<f64>,
    /// Common absolute slope of the recurrent core, when the fast path applies.
    pub core_slope: Option<Rat>,
    /// `log s` from the fast path.
    pub exact: Option<f64>,
}

fn lap_term(laps: usize, n: usize) -> f64 {
    if laps <= 1 {
        0.0
    } else {
        ((laps - 1) as f64).ln() / n as f64
    }
}

/// Lap-growth entropy sequence plus the constant-slope shortcut.
pub fn entropy_lap_growth(f: &PLMap, n_max: usize) -> Result<LapGrowth, PlError> {
    entropy_lap_growth_capped(f, n_max, DEFAULT_BREAKPOINT_CAP)
}

pub fn entropy_lap_growth_capped(f: &PLMap, n_max: usize, cap: usize) -> Result<LapGrowth, PlError> {
    if !f.domain().contains_interval(&f.range()) {
        return Err(PlError::Invalid("domain is not invariant".into()));
    }
    let core_slope = constant_slope_core(f);
    let exact = core_slope.as_ref().map(|s| s.ln().max(0.0));
    let mut terms = Vec::with_capacity(n_max);
    let mut acc = f.clone();
    for n in 1..=n_max {
        if n > 1 {
            acc = compose_in(f, &acc);
            if acc.breakpoints.len() > cap {
                return Err(PlError::BreakpointCap { cap, at: n, partial: terms });
            }
        }
        terms.push(lap_term(acc.lap_count(), n));
    }
    Ok(LapGrowth { terms, core_slope, exact })
}

/// Detects maps whose recurrent dynamics live on an invariant end interval carrying a
/// single absolute slope `s ≥ 1`, the rest being a nondecreasing piece that only feeds
/// into it or rests on fixed points. Returns `s`.
pub fn constant_slope_core(f: &PLMap) -> Option<Rat> {
    let slopes: Vec<Rat> = f.slopes().into_iter().map(|s| s.abs()).collect();
    let one = Rat::one();
    if slopes.iter().all(|s| s == &slopes[0]) {
        return (slopes[0] >= one).then(|| slopes[0].clone());
    }
    let bp = &f.breakpoints;
    let n = bp.len();
    // Core on the left: [x_0, x_c]; transient nondecreasing tail on [x_c, x_end].
    for c in 1..n - 1 {
        if let Some(s) = core_split(f, &slopes, c, true) {
            return Some(s);
        }
    }
    // Core on the right.
    for c in 1..n - 1 {
        if let Some(s) = core_split(f, &slopes, c, false) {
            return Some(s);
        }
    }
    None
}

fn core_split(f: &PLMap, slopes: &[Rat], c: usize, core_left: bool) -> Option<Rat> {
    let bp = &f.breakpoints;
    let n = bp.len();
    let (core, tail) = if core_left {
        (&slopes[..c], &slopes[c..])
    } else {
        (&slopes[c..], &slopes[..c])
    };
    let s = &core[0];
    if s < &Rat::one() || core.iter().any(|t| t != s) {
        return None;
    }
    let signed = f.slopes();
    let tail_signed = if core_left { &signed[c..] } else { &signed[..c] };
    if tail_signed.iter().any(|t| t.is_negative()) || tail.is_empty() {
        return None;
    }
    let core_dom = if core_left {
        Interval { lo: bp[0].0.clone(), hi: bp[c].0.clone() }
    } else {
        Interval { lo: bp[c].0.clone(), hi: bp[n - 1].0.clone() }
    };
    let core_img = f.restrict_in(&core_dom.lo, &core_dom.hi).range();
    if !core_dom.contains_interval(&core_img) {
        return None;
    }
    // Tail points move toward the core (or are fixed): f(x) <= x on a right tail,
    // f(x) >= x on a left tail; nondecreasing pieces then carry no recurrence except fixed points.
    let tail_pts = if core_left { &bp[c..] } else { &bp[..=c] };
    let ok = tail_pts.iter().all(|(x, y)| if core_left { y <= x } else { y >= x });
    ok.then(|| s.clone())
}

impl<'de> Deserialize<'de> for PLMap {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<PLMap, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            breakpoints: Vec<(Rat, Rat)>,
        }
        let raw = Raw::deserialize(de)?;
        PLMap::new(raw.breakpoints).map_err(serde::de::Error::custom)
    }
}
