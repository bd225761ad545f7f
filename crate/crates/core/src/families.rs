//! Named map families: tents, shifted folds and their partners, the plateau map,
//! affine embeddings, middle-third copies, dyadic block copies, constant-slope maps,
//! and the block-assembled bonding/diagonal pairs built from them.

use serde::{Deserialize, Serialize};

use crate::plmap::{compose, PLMap, PlError};
use crate::rat::{r, Rat};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FamilyError {
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("identity check failed: {0}")]
    Identity(String),
    #[error(transparent)]
    Map(#[from] PlError),
}

pub fn tent(n: u32) -> Result<PLMap, FamilyError> {
    if n < 2 {
        return Err(FamilyError::Param(format!("tent needs n >= 2, got {n}")));
    }
    let n = n as i64;
    Ok(PLMap::new((0..=n).map(|i| (r(i, n), Rat::int(i % 2))).collect())?)
}

fn check_odd(p: u32, what: &str) -> Result<i64, FamilyError> {
    if p < 3 || p.is_multiple_of(2) {
        return Err(FamilyError::Param(format!("{what} needs odd p >= 3, got {p}")));
    }
    Ok(p as i64)
}

/// Three-lap fold: up to 1 at `(p-1)/2p`, down to 0 at `(p-1)/p`, up to 1.
pub fn shifted_fold(p: u32) -> Result<PLMap, FamilyError> {
    let q = check_odd(p, "shifted_fold")?;
    Ok(PLMap::new(vec![
        (Rat::zero(), Rat::zero()),
        (r(q - 1, 2 * q), Rat::one()),
        (r(q - 1, q), Rat::zero()),
        (Rat::one(), Rat::one()),
    ])?)
}

/// The map `G_p` with `S_p ∘ G_p = T_p`: a ramp to `((p-1)/p)` at `2/p`, then a zigzag
/// between `1` and `(p-1)/p` on the grid `i/p`, then the diagonal on `[(p-1)/p, 1]`.
pub fn fold_partner(p: u32) -> Result<PLMap, FamilyError> {
    let q = check_odd(p, "fold_partner")?;
    let mut pts = vec![(Rat::zero(), Rat::zero())];
    for i in 2..q {
        let y = if i % 2 == 1 { Rat::one() } else { r(q - 1, q) };
        pts.push((r(i, q), y));
    }
    pts.push((Rat::one(), Rat::one()));
    let g = PLMap::new(pts)?;
    let lhs = compose(&shifted_fold(p)?, &g)?;
    if lhs != tent(p)? {
        return Err(FamilyError::Identity(format!("S_{p} o G_{p} != T_{p}")));
    }
    Ok(g)
}

/// `3x/2` on `[0,1/3]`, `1/2` on `[1/3,2/3]`, `3x/2 - 1/2` on `[2/3,1]`.
pub fn plateau_r() -> PLMap {
    PLMap::new(vec![
        (Rat::zero(), Rat::zero()),
        (r(1, 3), r(1, 2)),
        (r(2, 3), r(1, 2)),
        (Rat::one(), Rat::one()),
    ])
    .expect("static breakpoints")
}

/// `x ↦ (b-a)x + a`, a homeomorphism of `[0,1]` onto `[a,b]`.
pub fn affine(a: &Rat, b: &Rat) -> Result<PLMap, FamilyError> {
    if a >= b || a.is_negative() || b > &Rat::one() {
        return Err(FamilyError::Param(format!("affine needs 0 <= a < b <= 1, got a={a}, b={b}")));
    }
    Ok(PLMap::new(vec![(Rat::zero(), a.clone()), (Rat::one(), b.clone())])?)
}

fn require_unit_endpoints(w: &PLMap, what: &str) -> Result<(), FamilyError> {
    let d = w.domain();
    if d.lo != Rat::zero() || d.hi != Rat::one() {
        return Err(FamilyError::Param(format!("{what}: map must be defined on [0,1]")));
    }
    if w.start().1 != Rat::zero() || w.end().1 != Rat::one() {
        return Err(FamilyError::Param(format!("{what}: map must fix 0 and 1")));
    }
    Ok(())
}

/// Identity outside `[1/3,2/3]`, a rescaled copy of `w` inside.
pub fn middle_third_tilde(w: &PLMap) -> Result<PLMap, FamilyError> {
    require_unit_endpoints(w, "middle_third_tilde")?;
    let mut pts = vec![(Rat::zero(), Rat::zero())];
    pts.extend(w.embed(&r(1, 3), &r(2, 3)).into_breakpoints());
    pts.push((Rat::one(), Rat::one()));
    Ok(PLMap::new(pts)?)
}

/// The dyadic block `[(2^{i-1}-1)/2^{i-1}, (2^i-1)/2^i]`.
pub fn block_bounds(i: u32) -> (Rat, Rat) {
    assert!((1..62).contains(&i), "block index out of range");
    let a = 1i64 << (i - 1);
    let b = 1i64 << i;
    (r(a - 1, a), r(b - 1, b))
}

/// A copy of `f` living on block `i` (the result's domain is the block).
pub fn block_rescale(i: u32, f: &PLMap) -> Result<PLMap, FamilyError> {
    if i == 0 {
        return Err(FamilyError::Param("block index starts at 1".into()));
    }
    let d = f.domain();
    if d.lo != Rat::zero() || d.hi != Rat::one() {
        return Err(FamilyError::Param("block_rescale: map must be defined on [0,1]".into()));
    }
    let (a, b) = block_bounds(i);
    Ok(f.embed(&a, &b))
}

/// Self-map of `[0,1]` fixing 0 with every slope `±s`: a zigzag between 0 and 1.
fn zigzag(s: &Rat) -> Vec<(Rat, Rat)> {
    let mut pts = vec![(Rat::zero(), Rat::zero())];
    let step = s.recip();
    let mut x = Rat::zero();
    let mut up = true;
    loop {
        let nx = &x + &step;
        if nx >= Rat::one() {
            let rem = Rat::one() - &x;
            let y = if up { &rem * s } else { Rat::one() - &rem * s };
            pts.push((Rat::one(), y));
            break;
        }
        pts.push((nx.clone(), if up { Rat::one() } else { Rat::zero() }));
        x = nx;
        up = !up;
    }
    pts
}

/// Map fixing 0 and 1 with entropy `log s`: a slope-`s` zigzag `f_s` on `[0,1/2]`
/// followed by `2(x-1)(1 - f_s(1/2)) + 1` on `[1/2,1]`.
pub fn slope_map(s: &Rat) -> Result<PLMap, FamilyError> {
    if s < &Rat::one() {
        return Err(FamilyError::Param(format!("slope_map needs s >= 1, got {s}")));
    }
    let half = r(1, 2);
    let mut pts: Vec<(Rat, Rat)> = zigzag(s).into_iter().map(|(x, y)| (&x * &half, &y * &half)).collect();
    let mid = pts.last().expect("nonempty").1.clone();
    debug_assert!(mid <= half);
    let _ = mid;
    pts.push((Rat::one(), Rat::one()));
    Ok(PLMap::new(pts)?)
}

/// Inner map index `2n+1` used by the block construction.
fn odd_index(n: u32) -> Result<u32, FamilyError> {
    if n == 0 {
        return Err(FamilyError::Param("sequence entries must be positive".into()));
    }
    Ok(2 * n + 1)
}

fn assemble(blocks: Vec<PLMap>) -> Result<PLMap, FamilyError> {
    let mut pts: Vec<(Rat, Rat)> = vec![(Rat::zero(), Rat::zero())];
    for b in blocks {
        for p in b.into_breakpoints() {
            if pts.last().map(|l| l.0 == p.0).unwrap_or(false) {
                let last = pts.last().expect("nonempty");
                if last.1 != p.1 {
                    return Err(FamilyError::Identity(format!("blocks disagree at x={}", p.0)));
                }
                continue;
            }
            pts.push(p);
        }
    }
    if pts.last().map(|l| l.0 != Rat::one()).unwrap_or(true) {
        pts.push((Rat::one(), Rat::one()));
    }
    Ok(PLMap::new(pts)?)
}

fn block(i: u32, f: &PLMap) -> Result<PLMap, FamilyError> {
    block_rescale(i, f)
}

/// The bonding map `f_k` and diagonal map `g_k` of the block construction.
///
/// `g_k`: `W` on block 1, copies of `G̃_{2n_i+1}` on blocks `2..=k`, `T̃_{2n_k+1}` on block
/// `k+1`, `R` on block `k+2`, identity above. `f_k`: identity up to block `k`,
/// `S̃_{2n_k+1}` on block `k+1`, `R` on block `k+2`, identity above.
pub fn appendix_maps(k: usize, n_seq: &[u32], s: &Rat) -> Result<(PLMap, PLMap), FamilyError> {
    if k == 0 || k > n_seq.len() {
        return Err(FamilyError::Param(format!("level {k} outside 1..={}", n_seq.len())));
    }
    if k + 2 >= 62 {
        return Err(FamilyError::Param("level too deep".into()));
    }
    let kk = k as u32;
    let w = slope_map(s)?;
    let pk = odd_index(n_seq[k - 1])?;
    let r_map = plateau_r();

    let mut g_blocks = vec![block(1, &w)?];
    for i in 1..k {
        let p = odd_index(n_seq[i - 1])?;
        g_blocks.push(block(i as u32 + 1, &middle_third_tilde(&fold_partner(p)?)?)?);
    }
    g_blocks.push(block(kk + 1, &middle_third_tilde(&tent(pk)?)?)?);
    g_blocks.push(block(kk + 2, &r_map)?);
    let g = assemble(g_blocks)?;

    let f_blocks = vec![
        block(kk + 1, &middle_third_tilde(&shifted_fold(pk)?)?)?,
        block(kk + 2, &r_map)?,
    ];
    let f = assemble(f_blocks)?;
    Ok((f, g))
}

/// `appendix_maps` plus the compatibility check `f_k ∘ g_{k+1} = g_k ∘ f_{k+1}` whenever
/// level `k+1` exists.
pub fn appendix_pair(k: usize, n_seq: &[u32], s: &Rat) -> Result<(PLMap, PLMap), FamilyError> {
    let (f, g) = appendix_maps(k, n_seq, s)?;
    if k < n_seq.len() {
        let (f1, g1) = appendix_maps(k + 1, n_seq, s)?;
        if compose(&f, &g1)? != compose(&g, &f1)? {
            return Err(FamilyError::Identity(format!("f_{k} o g_{} != g_{k} o f_{}", k + 1, k + 1)));
        }
    }
    Ok((f, g))
}

/// Serializable description of a family member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum FamilySpec {
    Identity {},
    Tent { n: u32 },
    ShiftedFold { p: u32 },
    FoldPartner { p: u32 },
    PlateauR {},
    Affine { a: Rat, b: Rat },
    Tilde { inner: Box<FamilySpec> },
    BlockRescale { i: u32, inner: Box<FamilySpec> },
    SlopeMap { s: Rat },
    AppendixF { k: usize, n_seq: Vec<u32>, s: Rat },
    AppendixG { k: usize, n_seq: Vec<u32>, s: Rat },
    Explicit { map: PLMap },
}

impl FamilySpec {
    pub fn build(&self) -> Result<PLMap, FamilyError> {
        match self {
            FamilySpec::Identity {} => Ok(PLMap::identity()),
            FamilySpec::Tent { n } => tent(*n),
            FamilySpec::ShiftedFold { p } => shifted_fold(*p),
            FamilySpec::FoldPartner { p } => fold_partner(*p),
            FamilySpec::PlateauR {} => Ok(plateau_r()),
            FamilySpec::Affine { a, b } => affine(a, b),
            FamilySpec::Tilde { inner } => middle_third_tilde(&inner.build()?),
            FamilySpec::BlockRescale { i, inner } => block_rescale(*i, &inner.build()?),
            FamilySpec::SlopeMap { s } => slope_map(s),
            FamilySpec::AppendixF { k, n_seq, s } => appendix_maps(*k, n_seq, s).map(|p| p.0),
            FamilySpec::AppendixG { k, n_seq, s } => appendix_maps(*k, n_seq, s).map(|p| p.1),
            FamilySpec::Explicit { map } => Ok(map.clone()),
        }
    }

    /// A JSON spec when the text starts with `{`, the short form otherwise.
    pub fn parse(s: &str) -> Result<FamilySpec, FamilyError> {
        if s.trim_start().starts_with('{') {
            serde_json::from_str(s).map_err(|e| FamilyError::Param(format!("family spec JSON: {e}")))
        } else {
            FamilySpec::parse_short(s)
        }
    }

    /// Parses the short command-line form: `id`, `tent:N`, `fold:P`, `partner:P`, `R`,
    /// `affine:A,B`, `slope:S`, `tilde:<spec>`, `block:I:<spec>`.
    pub fn parse_short(s: &str) -> Result<FamilySpec, FamilyError> {
        let s = s.trim();
        let bad = || FamilyError::Param(format!("cannot parse family spec {s:?}"));
        let (head, rest) = s.split_once(':').unwrap_or((s, ""));
        let num = |t: &str| t.trim().parse::<u32>().map_err(|_| bad());
        let rat = |t: &str| t.trim().parse::<Rat>().map_err(|_| bad());
        Ok(match head {
            "id" | "identity" => FamilySpec::Identity {},
            "tent" | "T" => FamilySpec::Tent { n: num(rest)? },
            "fold" | "S" => FamilySpec::ShiftedFold { p: num(rest)? },
            "partner" | "G" => FamilySpec::FoldPartner { p: num(rest)? },
            "R" | "plateau" => FamilySpec::PlateauR {},
            "affine" | "L" => {
                let (a, b) = rest.split_once(',').ok_or_else(bad)?;
                FamilySpec::Affine { a: rat(a)?, b: rat(b)? }
            }
            "slope" | "W" => FamilySpec::SlopeMap { s: rat(rest)? },
            "tilde" => FamilySpec::Tilde { inner: Box::new(FamilySpec::parse_short(rest)?) },
            "block" => {
                let (i, inner) = rest.split_once(':').ok_or_else(bad)?;
                FamilySpec::BlockRescale { i: num(i)?, inner: Box::new(FamilySpec::parse_short(inner)?) }
            }
            _ => return Err(bad()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plmap::Interval;

    #[test]
    fn tent_three_breakpoints() {
        let t = tent(3).unwrap();
        assert_eq!(
            t.breakpoints(),
            &[(r(0, 1), r(0, 1)), (r(1, 3), r(1, 1)), (r(2, 3), r(0, 1)), (r(1, 1), r(1, 1))]
        );
        assert!(tent(1).is_err());
    }

    #[test]
    fn shifted_fold_ticks() {
        assert_eq!(shifted_fold(3).unwrap().critical_points(), vec![r(1, 3), r(2, 3)]);
        assert_eq!(shifted_fold(5).unwrap().critical_points(), vec![r(2, 5), r(4, 5)]);
        assert!(shifted_fold(4).is_err());
        assert_eq!(shifted_fold(3).unwrap().eval(&r(5, 6)).unwrap(), r(1, 2));
    }

    #[test]
    fn fold_partner_shapes() {
        assert_eq!(fold_partner(3).unwrap(), PLMap::identity());
        let g5 = fold_partner(5).unwrap();
        assert_eq!(
            g5.breakpoints(),
            &[(r(0, 1), r(0, 1)), (r(2, 5), r(4, 5)), (r(3, 5), r(1, 1)), (r(4, 5), r(4, 5)), (r(1, 1), r(1, 1))]
        );
        let g7 = fold_partner(7).unwrap();
        assert_eq!(g7.breakpoints().len(), 7);
        assert_eq!(g7.breakpoints()[1], (r(2, 7), r(6, 7)));
    }

    #[test]
    fn fold_partners_have_zero_entropy() {
        for p in [5, 7, 9] {
            let g = fold_partner(p).unwrap();
            assert!(g.breakpoints().iter().all(|(x, y)| y >= x));
            let lg = crate::plmap::entropy_lap_growth(&g, 1).unwrap();
            assert_eq!(lg.exact, Some(0.0));
            // Laps grow linearly in the iterate.
            let base = g.lap_count() - 1;
            for n in 1..=8 {
                assert!(crate::plmap::iterate(&g, n).unwrap().lap_count() <= base * n + 1, "G_{p}^{n}");
            }
        }
    }

    #[test]
    fn plateau_values() {
        let rr = plateau_r();
        assert_eq!(rr.eval(&r(1, 3)).unwrap(), r(1, 2));
        assert_eq!(rr.eval(&r(5, 6)).unwrap(), r(3, 4));
    }

    #[test]
    fn affine_values() {
        assert_eq!(affine(&Rat::zero(), &Rat::one()).unwrap(), PLMap::identity());
        assert_eq!(affine(&r(1, 3), &r(2, 3)).unwrap().eval(&r(1, 2)).unwrap(), r(1, 2));
        assert_eq!(affine(&r(1, 2), &r(3, 4)).unwrap().eval(&Rat::one()).unwrap(), r(3, 4));
        assert!(affine(&r(1, 2), &r(1, 2)).is_err());
    }

    #[test]
    fn tilde_of_tent3() {
        let t = middle_third_tilde(&tent(3).unwrap()).unwrap();
        assert_eq!(
            t.breakpoints(),
            &[
                (r(0, 1), r(0, 1)),
                (r(1, 3), r(1, 3)),
                (r(4, 9), r(2, 3)),
                (r(5, 9), r(1, 3)),
                (r(2, 3), r(2, 3)),
                (r(1, 1), r(1, 1))
            ]
        );
        assert_eq!(middle_third_tilde(&PLMap::identity()).unwrap(), PLMap::identity());
        assert!(middle_third_tilde(&tent(2).unwrap()).is_err());
    }

    #[test]
    fn blocks() {
        let f = block_rescale(1, &tent(2).unwrap()).unwrap();
        assert_eq!(f.domain(), Interval::span(r(0, 1), r(1, 2)));
        let g = block_rescale(2, &tent(3).unwrap()).unwrap();
        assert_eq!(g.domain(), Interval::span(r(1, 2), r(3, 4)));
    }

    #[test]
    fn slope_maps() {
        assert_eq!(slope_map(&Rat::one()).unwrap(), PLMap::identity());
        let w2 = slope_map(&Rat::int(2)).unwrap();
        assert_eq!(w2.breakpoints(), &[(r(0, 1), r(0, 1)), (r(1, 4), r(1, 2)), (r(1, 2), r(0, 1)), (r(1, 1), r(1, 1))]);
        assert!(slope_map(&r(1, 2)).is_err());
    }

    #[test]
    fn appendix_first_level_shape() {
        let (f1, g1) = appendix_pair(1, &[2, 3], &Rat::int(2)).unwrap();
        assert_eq!(f1.eval(&r(1, 4)).unwrap(), r(1, 4));
        assert_eq!(g1.eval(&r(15, 16)).unwrap(), r(15, 16));
        assert_eq!(g1.eval(&r(1, 8)).unwrap(), r(1, 4));
    }

    #[test]
    fn spec_round_trip() {
        let s = FamilySpec::BlockRescale { i: 2, inner: Box::new(FamilySpec::Tent { n: 3 }) };
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<FamilySpec>(&j).unwrap(), s);
        assert_eq!(FamilySpec::parse_short("block:2:tent:3").unwrap(), s);
        assert_eq!(FamilySpec::parse_short("affine:1/3,2/3").unwrap().build().unwrap().eval(&r(1, 2)).unwrap(), r(1, 2));
    }
}
