//! Acceptance criteria 1-9, run in order with one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the lines reach the terminal and each criterion
//! is timed alone.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use plent::branch::{branch_counts, initial_branches, next_family, pair_arc};
use plent::entropy::{
    bracket_theorem_main, largest_horseshoe, separated_count, spanning_count, verify_horseshoe, Bound, Trajectories,
};
use plent::entropy::enumerate_orbits;
use plent::families::{fold_partner, middle_third_tilde, plateau_r, shifted_fold, slope_map, tent};
use plent::invlim::{
    appendix_report, check_diagonal_compat, diagonal_trajectories, entropy_estimate_diagonal, lift_orbit, DiagonalParams,
    DiagonalSystem, GridSeed, InvLimError, TruncatedPoint,
};
use plent::plmap::{compose, entropy_lap_growth, iterate};
use plent::relation::{
    compose_rel, graph_of, inverse_rel, param_graph, rel_equals, strongly_commutes, Direction, MonotoneArc, PLRelation,
};
use plent::{r, Interval, PLMap, Rat};

type Check = Result<String, String>;
type Criterion = (usize, fn() -> Check, Duration);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn t(n: u32) -> PLMap {
    tent(n).unwrap()
}

/// Evaluation by walking breakpoints, independent of `PLMap::eval`.
fn eval_by_scan(f: &PLMap, x: &Rat) -> Rat {
    for w in f.breakpoints().windows(2) {
        let ((x0, y0), (x1, y1)) = (&w[0], &w[1]);
        if x0 <= x && x <= x1 {
            return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
        }
    }
    panic!("{x} outside domain");
}

/// Agreement of `outer ∘ inner` with `target` on a fine rational grid, by pointwise
/// evaluation rather than composition.
fn pointwise_composition(outer: &PLMap, inner: &PLMap, target: &PLMap, den: i64) -> bool {
    (0..=den).all(|i| {
        let x = r(i, den);
        eval_by_scan(outer, &eval_by_scan(inner, &x)) == eval_by_scan(target, &x)
    })
}

fn criterion_1() -> Check {
    for p in [3u32, 5, 7, 9] {
        let (s, g) = (shifted_fold(p).unwrap(), fold_partner(p).unwrap());
        ensure(compose(&s, &g).unwrap() == t(p), format!("S_{p}∘G_{p} != T_{p}"))?;
        ensure(pointwise_composition(&s, &g, &t(p), 7 * 11 * 13 * p as i64), format!("pointwise S_{p}∘G_{p}"))?;
    }
    for p in [5u32, 7, 9] {
        let lhs = param_graph(&shifted_fold(p).unwrap(), &t(p)).unwrap();
        let rhs = graph_of(&t((p - 1) / 2)).union(&PLRelation::diagonal());
        ensure(rel_equals(&lhs, &rhs), format!("T_{p}∘S_{p}⁻¹ != T_{} ∪ D", (p - 1) / 2))?;
        let via_compose = compose_rel(&graph_of(&t(p)), &inverse_rel(&graph_of(&shifted_fold(p).unwrap()))).unwrap();
        ensure(rel_equals(&via_compose, &rhs), format!("composed T_{p}∘S_{p}⁻¹ != T_{} ∪ D", (p - 1) / 2))?;
    }
    for w in [3u32, 5] {
        let wt = middle_third_tilde(&t(w)).unwrap();
        ensure(compose(&plateau_r(), &wt).unwrap() == plateau_r(), format!("R∘T̃_{w} != R"))?;
        ensure(pointwise_composition(&plateau_r(), &wt, &plateau_r(), 3 * 5 * 7 * 11), format!("pointwise R∘T̃_{w}"))?;
    }
    ensure(fold_partner(3).unwrap() == PLMap::identity(), "G_3 != id")?;
    Ok("S∘G = T (p=3,5,7,9), T∘S⁻¹ = T_(p-1)/2 ∪ D (p=5,7,9), R∘w̃ = R, G_3 = id".into())
}

fn criterion_2() -> Check {
    let mut rows = Vec::new();
    for (n, m, want) in [(2, 3, true), (2, 5, true), (3, 4, true), (3, 5, true), (4, 5, true), (4, 6, false), (2, 4, false), (3, 6, false)] {
        let got = strongly_commutes(&t(n), &t(m)).unwrap();
        ensure(got == want, format!("strongly_commutes(T_{n}, T_{m}) = {got}"))?;
        rows.push(format!("({n},{m})={}", if got { "T" } else { "F" }));
    }
    let a = param_graph(&t(4), &t(6)).unwrap();
    let b = param_graph(&t(2), &t(3)).unwrap();
    ensure(rel_equals(&a, &b), "T_6∘T_4⁻¹ != T_3∘T_2⁻¹")?;
    let a2 = compose_rel(&graph_of(&t(6)), &inverse_rel(&graph_of(&t(4)))).unwrap();
    ensure(rel_equals(&a2, &b), "composed T_6∘T_4⁻¹ != T_3∘T_2⁻¹")?;
    Ok(format!("{} ; T_6∘T_4⁻¹ = T_3∘T_2⁻¹", rows.join(" ")))
}

fn find_arc(arcs: &[MonotoneArc], dom: (Rat, Rat), ran: (Rat, Rat), dir: Direction) -> &MonotoneArc {
    arcs.iter()
        .find(|a| a.dom == Interval::span(dom.0.clone(), dom.1.clone()) && a.ran == Interval::span(ran.0.clone(), ran.1.clone()) && a.direction == dir)
        .expect("branch present")
}

fn criterion_3() -> Check {
    let m1 = initial_branches(&t(2), &t(3)).unwrap();
    ensure(m1.len() == 4, format!("|M_1| = {}", m1.len()))?;
    let m2 = next_family(&m1, &m1);
    ensure(m2.len() == 14, format!("|M_2| = {}", m2.len()))?;
    let arcs = &m1.arcs;
    let a = find_arc(arcs, (r(0, 1), r(2, 3)), (r(0, 1), r(1, 1)), Direction::Increasing);
    let b = find_arc(arcs, (r(2, 3), r(1, 1)), (r(1, 2), r(1, 1)), Direction::Decreasing);
    let c = find_arc(arcs, (r(2, 3), r(1, 1)), (r(0, 1), r(1, 2)), Direction::Increasing);
    let ab = pair_arc(a, b).ok_or("C_1(A,B) undefined")?;
    ensure(ab.dom == Interval::span(r(4, 9), r(2, 3)) && ab.ran == Interval::span(r(1, 2), r(1, 1)), format!("C_1(A,B): {} -> {}", ab.dom, ab.ran))?;
    let ca = pair_arc(c, a).ok_or("C_1(C,A) undefined")?;
    ensure(ca.dom == Interval::span(r(2, 3), r(1, 1)) && ca.ran == Interval::span(r(0, 1), r(3, 4)), format!("C_1(C,A): {} -> {}", ca.dom, ca.ran))?;
    ensure(pair_arc(c, c).is_none() && pair_arc(c, b).is_none(), "C_1(C,C) or C_1(C,B) defined")?;
    // Endpoint images through the chain, as an independent check of the composite.
    ensure(ab.eval(&r(4, 9)) == b.eval(&a.eval(&r(4, 9)).unwrap()), "C_1(A,B) chain at 4/9")?;

    let mut sizes = Vec::new();
    for (n, m) in [(3u32, 2u32), (5, 3)] {
        let counts = branch_counts(&t(m), &t(n), 8).unwrap();
        for c in &counts {
            let bound = (c.k as u128 + 1) * (n as u128).pow(c.k as u32);
            ensure((c.count as u128) <= bound, format!("({n},{m}) |M_{}| = {} > {bound}", c.k, c.count))?;
        }
        sizes.push(format!("({n},{m}) |M_8|={}", counts[7].count));
    }
    Ok(format!("|M_1|=4 |M_2|=14, C_1(A,B): [4/9,2/3]→[1/2,1], C_1(C,A): [2/3,1]→[0,3/4]; {}", sizes.join(", ")))
}

fn criterion_4() -> Check {
    let rep = bracket_theorem_main(3, 2, 8).unwrap();
    let ln3 = 3f64.ln();
    let last = rep.rows.last().unwrap();
    ensure(last.lower >= ln3 - 2f64.ln() / 8.0, format!("lower {} < log3 - log2/8", last.lower))?;
    ensure(last.upper <= ln3 + 9f64.ln() / 8.0, format!("upper {} > log3 + log9/8", last.upper))?;
    for w in rep.rows.windows(2) {
        ensure(w[1].lower >= w[0].lower && w[1].upper <= w[0].upper, format!("bracket widens at k={}", w[1].k))?;
    }
    for row in &rep.rows {
        ensure(row.lower <= ln3 && ln3 <= row.upper, format!("log 3 outside bracket at k={}", row.k))?;
    }
    // Second route: certificates re-verified on powers built by relation composition.
    let gamma = param_graph(&t(2), &t(3)).unwrap();
    let mut power = gamma.clone();
    for k in 1..=4usize {
        if k > 1 {
            power = compose_rel(&gamma, &power).unwrap();
        }
        let direct = param_graph(&iterate(&t(2), k).unwrap(), &iterate(&t(3), k).unwrap()).unwrap();
        ensure(rel_equals(&power, &direct), format!("Γ^{k} routes disagree"))?;
        let n = rep.rows[k - 1].horseshoe;
        let cert = rep.certs.iter().find(|c| c.n == n && verify_horseshoe(&power, &c.intervals));
        ensure(cert.is_some(), format!("no certificate of size {n} verifies on Γ^{k}"))?;
    }
    let rep53 = bracket_theorem_main(5, 3, 5).unwrap();
    let ln5 = 5f64.ln();
    let l53 = rep53.rows.last().unwrap();
    ensure(rep53.rows.iter().all(|r| r.lower <= ln5 && ln5 <= r.upper), "log 5 outside (5,3) bracket")?;
    Ok(format!(
        "(3,2) k=8: [{:.4}, {:.4}] ∋ log3={:.4}; (5,3) k=5: [{:.4}, {:.4}] ∋ log5={:.4}",
        last.lower, last.upper, ln3, l53.lower, l53.upper, ln5
    ))
}

/// Laps counted from sign changes of successive differences on the grid `i / den`.
fn laps_by_sampling(f: &PLMap, k: usize, den: i64) -> usize {
    let vals: Vec<Rat> = (0..=den)
        .map(|i| {
            let mut x = r(i, den);
            for _ in 0..k {
                x = eval_by_scan(f, &x);
            }
            x
        })
        .collect();
    let mut laps = 1;
    let mut dir = 0;
    for w in vals.windows(2) {
        let d = (&w[1] - &w[0]).signum();
        if d != 0 && dir != 0 && d != dir {
            laps += 1;
        }
        if d != 0 {
            dir = d;
        }
    }
    laps
}

fn criterion_5() -> Check {
    let lg = entropy_lap_growth(&t(3), 6).unwrap();
    let laps = iterate(&t(3), 6).unwrap().lap_count();
    ensure(laps == 729, format!("lap_count(T_3^6) = {laps}"))?;
    ensure(laps_by_sampling(&t(3), 6, 729 * 2) == laps, "sampled lap count differs")?;
    let term = lg.terms[5];
    ensure((term - ((laps - 1) as f64).ln() / 6.0).abs() < 1e-15, "lap term mismatch")?;
    ensure((term - 3f64.ln()).abs() < 1e-3, format!("(1/6) log 728 = {term}"))?;
    for s in [r(3, 2), r(2, 1), r(3, 1)] {
        let lg = entropy_lap_growth(&slope_map(&s).unwrap(), 4).unwrap();
        ensure(lg.core_slope.as_ref() == Some(&s), format!("slope_map({s}): core slope {:?}", lg.core_slope))?;
        ensure(lg.exact == Some(s.ln()), format!("slope_map({s}): {:?}", lg.exact))?;
    }
    Ok(format!("(1/6) log(729 - 1) = {term:.6}, |Δ| = {:.2e}; fast path exact for s = 3/2, 2, 3", (term - 3f64.ln()).abs()))
}

fn criterion_6() -> Check {
    let t2 = graph_of(&t(2));
    let rel = compose_rel(&inverse_rel(&t2), &t2).unwrap();
    let h = largest_horseshoe(&rel).ok_or("no horseshoe for T_2⁻¹∘T_2")?;
    let want = vec![Interval::span(r(0, 1), r(1, 3)), Interval::span(r(2, 3), r(1, 1))];
    ensure(h.intervals == want, format!("got {:?}", h.intervals))?;
    ensure(verify_horseshoe(&rel, &h.intervals), "re-verification failed")?;
    // Closed form: T_2⁻¹∘T_2 = {z = x} ∪ {z = 1 - x}.
    let closed = PLRelation::diagonal().union(&graph_of(&PLMap::new(vec![(r(0, 1), r(1, 1)), (r(1, 1), r(0, 1))]).unwrap()));
    ensure(rel_equals(&rel, &closed), "T_2⁻¹∘T_2 is not D ∪ anti-diagonal")?;
    ensure(verify_horseshoe(&closed, &h.intervals), "certificate fails on the closed form")?;

    let gamma = param_graph(&t(2), &t(3)).unwrap();
    let g3 = compose_rel(&gamma, &compose_rel(&gamma, &gamma).unwrap()).unwrap();
    let h3 = largest_horseshoe(&g3).ok_or("no horseshoe for Γ³")?;
    ensure(h3.n == 14, format!("Γ³ horseshoe of size {}", h3.n))?;
    ensure(verify_horseshoe(&g3, &h3.intervals), "Γ³ re-verification failed")?;
    let direct = param_graph(&iterate(&t(2), 3).unwrap(), &iterate(&t(3), 3).unwrap()).unwrap();
    ensure(verify_horseshoe(&direct, &h3.intervals), "Γ³ certificate fails on (T_8, T_27)")?;
    Ok("T_2⁻¹∘T_2: {[0,1/3],[2/3,1]} verified; Γ³: 14-horseshoe verified on both routes".into())
}

fn criterion_7() -> Check {
    let ln2 = 2f64.ln();
    let (depth, n) = (8usize, 10usize);
    let levels = depth + n + 1;
    let params = DiagonalParams::new(depth, n, 1.0 / 16.0, r(1, 256));
    let shift = DiagonalSystem::shift(&t(2), levels).unwrap();
    ensure(check_diagonal_compat(&shift, levels).unwrap().ok, "shift not compatible")?;
    let est = entropy_estimate_diagonal(&shift, &params).unwrap().diagonal_estimate().unwrap();
    ensure(est >= ln2 - 0.2 && est <= ln2 + 0.05, format!("shift estimate {est} outside [log2-0.2, log2+0.05]"))?;

    // Oracle: the shift written out by hand. With x_j = x_0 / 2^j the backward choices,
    // coordinate i at time s is T^(s-i)(x_0) for i <= s and x_(i-s) otherwise.
    let rows: Vec<Vec<f64>> = (0..=256)
        .map(|k| {
            let x0 = k as f64 / 256.0;
            let mut orbit = vec![x0];
            for _ in 1..n {
                let y = *orbit.last().unwrap();
                orbit.push(if y <= 0.5 { 2.0 * y } else { 2.0 - 2.0 * y });
            }
            let mut row = Vec::new();
            for s in 0..n {
                for i in 0..=depth {
                    let v = if i <= s { orbit[s - i] } else { x0 / 2f64.powi((i - s) as i32) };
                    row.push(v / 2f64.powi(i as i32));
                }
            }
            row
        })
        .collect();
    let oracle = separated_count(&Trajectories::with_blocks(rows, depth + 1), 1.0 / 16.0);
    let traj = diagonal_trajectories(&shift, depth, n, &r(1, 256), GridSeed::Base).unwrap();
    let direct = separated_count(&traj, 1.0 / 16.0);
    ensure(oracle == direct, format!("oracle count {:?} vs {:?}", oracle, direct))?;

    let diag = DiagonalSystem::constant(&t(2), &t(3), levels);
    ensure(check_diagonal_compat(&diag, levels).unwrap().ok, "(T_2,T_3) not compatible")?;
    let est23 = entropy_estimate_diagonal(&diag, &params).unwrap().diagonal_estimate().unwrap();
    let upper = branch_counts(&t(2), &t(3), 8).unwrap().last().unwrap().log_growth;
    ensure(est23 <= upper + 0.05, format!("(T_2,T_3) estimate {est23} > {upper} + 0.05"))?;
    Ok(format!("shift: {est:.4} (log2={ln2:.4}, s={}); (T_2,T_3): {est23:.4} <= {upper:.4} + 0.05; tail 2^-8", direct.value))
}

fn criterion_8() -> Check {
    let seq = [2u32, 5, 2, 5];
    let s = r(2, 1);
    let rep = appendix_report(&seq, &s, 3, 8, &r(1, 64)).unwrap();
    ensure(rep.compat.ok, format!("compatibility fails at {:?}", rep.compat.failed))?;
    let sys = DiagonalSystem::appendix(&seq, &s, 4).unwrap();
    ensure(check_diagonal_compat(&sys, 4).unwrap().ok, "compatibility k <= 3")?;
    let log_s = 2f64.ln();
    let mut parts = Vec::new();
    for l in &rep.levels {
        let log_n = (l.n_k as f64).ln();
        ensure(l.lower >= log_n - 1e-12, format!("k={}: horseshoe bound {} < log {}", l.k, l.lower, l.n_k))?;
        ensure(l.lower >= log_s - 1e-12, format!("k={}: horseshoe bound {} < log s", l.k, l.lower))?;
        let cert = l.horseshoe.as_ref().ok_or("missing certificate")?;
        ensure(verify_horseshoe(&param_graph(sys.bonding(l.k).unwrap(), sys.diagonal(l.k).unwrap()).unwrap(), &cert.intervals), "certificate")?;
        let allowance = log_s.max(log_n) + 9f64.ln() / 8.0;
        ensure(l.upper <= allowance, format!("k={}: block bound {} > {allowance}", l.k, l.upper))?;
        parts.push(format!("k={} [{:.3}, {:.3}] first-block {:.3}", l.k, l.lower, l.upper, l.first_block_lower));
    }
    let w = rep.lift_failure.as_ref().ok_or("every orbit lifted")?;
    match lift_orbit(&sys, w.level, &w.orbit, w.level + 2) {
        Err(InvLimError::Lift { level }) => parts.push(format!("lift fails at level {level}")),
        other => return Err(format!("witness orbit did not fail to lift: {other:?}")),
    }
    Ok(parts.join("; "))
}

fn criterion_9() -> Check {
    // Sandwich r(eps) <= s(eps) <= r(eps/2) on small exhaustive orbit sets.
    let rels = [
        graph_of(&t(2)),
        param_graph(&t(2), &t(3)).unwrap(),
        compose_rel(&inverse_rel(&graph_of(&t(2))), &graph_of(&t(2))).unwrap(),
    ];
    let mut sandwiches = 0;
    for rel in &rels {
        for n in 1..=2 {
            let o = enumerate_orbits(rel, n, &r(1, 8)).unwrap();
            let tr = Trajectories::from_orbits(&o);
            if tr.len() > 64 {
                continue;
            }
            for eps in [0.5, 0.25, 0.125] {
                let (s, r1, r2) = (separated_count(&tr, eps), spanning_count(&tr, eps), spanning_count(&tr, eps / 2.0));
                ensure([s.bound, r1.bound, r2.bound].iter().all(|b| *b == Bound::Exact), "inexact count on tiny instance")?;
                ensure(r1.value <= s.value && s.value <= r2.value, format!("r={} s={} r/2={}", r1.value, s.value, r2.value))?;
                sandwiches += 1;
            }
        }
    }

    // Composition against chaining fibers, 200 random rationals per pair.
    let pairs: Vec<(PLRelation, PLRelation)> = vec![
        (graph_of(&t(3)), inverse_rel(&graph_of(&t(2)))),
        (param_graph(&t(2), &t(3)).unwrap(), param_graph(&t(2), &t(3)).unwrap()),
        (inverse_rel(&graph_of(&t(3))), graph_of(&t(2))),
        (graph_of(&slope_map(&r(3, 2)).unwrap()), param_graph(&t(3), &t(5)).unwrap()),
    ];
    let mut runner = TestRunner::new_with_rng(Config { cases: 200, failure_persistence: None, ..Config::default() }, proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha));
    for (s, rr) in &pairs {
        let composed = compose_rel(s, rr).unwrap();
        runner
            .run(&(0i64..=1009), |num| {
                let x = r(num, 1009);
                let mids = rr.evaluate_at(&x);
                let chained = s.image_of_set(&mids.parts);
                prop_assert_eq!(composed.evaluate_at(&x).parts, chained);
                Ok(())
            })
            .map_err(|e| format!("composition oracle: {e}"))?;
    }

    // Transpose twice is the identity.
    for rel in rels.iter().chain(pairs.iter().map(|p| &p.1)) {
        ensure(rel_equals(&inverse_rel(&inverse_rel(rel)), rel), "inverse_rel is not an involution")?;
    }

    // Separated families stay separated after projecting to a deep coordinate.
    let eps = 1.0 / 16.0;
    let deep = 5; // 2^-5 < eps
    let sys = DiagonalSystem::constant(&t(2), &t(3), 10);
    let mut families = 0;
    for seed in [GridSeed::Base, GridSeed::Top] {
        let pts: Vec<TruncatedPoint> = (0..=128)
            .map(|i| match seed {
                GridSeed::Base => TruncatedPoint::from_base(&sys, r(i, 128), 8).unwrap(),
                GridSeed::Top => TruncatedPoint::from_top(&sys, r(i, 128), 8).unwrap(),
            })
            .collect();
        let mut fam: Vec<&TruncatedPoint> = Vec::new();
        for p in &pts {
            if fam.iter().all(|q| plent::invlim::truncated_metric(p, q).unwrap().value > eps) {
                fam.push(p);
            }
        }
        let mut proj: Vec<&Rat> = fam.iter().map(|p| &p.coords[deep]).collect();
        proj.sort();
        proj.dedup();
        ensure(proj.len() == fam.len(), format!("projection merged points: {} -> {}", fam.len(), proj.len()))?;
        families += 1;
    }
    Ok(format!("{sandwiches} sandwiches, {} composition oracles x 200 points, involution, {families} projection families", pairs.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (1, criterion_1, Duration::from_secs(10)),
        (2, criterion_2, Duration::from_secs(10)),
        (3, criterion_3, Duration::from_secs(60)),
        (4, criterion_4, Duration::from_secs(300)),
        (5, criterion_5, Duration::from_secs(30)),
        (6, criterion_6, Duration::from_secs(10)),
        (7, criterion_7, Duration::from_secs(300)),
        (8, criterion_8, Duration::from_secs(120)),
        (9, criterion_9, Duration::from_secs(60)),
    ];
    let mut failed = 0;
    for (id, run, budget) in criteria {
        let start = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into()))
        });
        let took = start.elapsed();
        let res = match res {
            Ok(msg) if took > budget => Err(format!("{msg} (over budget {budget:?})")),
            other => other,
        };
        match res {
            Ok(msg) => println!("criterion {id}: PASS [{took:.2?}] {msg}"),
            Err(msg) => {
                failed += 1;
                println!("criterion {id}: FAIL [{took:.2?}] {msg}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
