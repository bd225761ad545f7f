use proptest::prelude::*;

use plent::entropy::{enumerate_orbits, largest_horseshoe, separated_count, spanning_count, verify_horseshoe, Trajectories};
use plent::families::tent;
use plent::invlim::{apply_diagonal, lift_orbit, projects_onto, truncated_metric, DiagonalSystem, TruncatedPoint};
use plent::plmap::{compose, iterate, merge_intervals};
use plent::relation::{compose_rel, graph_of, inverse_rel, param_graph, rel_equals};
use plent::{r, Interval, PLMap, Rat};

fn unit_rat() -> impl Strategy<Value = Rat> {
    (1i64..=720).prop_flat_map(|d| (0..=d).prop_map(move |n| r(n, d)))
}

fn small_rat() -> impl Strategy<Value = (i64, i64)> {
    (-50i64..=50, 1i64..=40)
}

/// `T_n`, with `T_1` the identity.
fn t(n: u32) -> PLMap {
    if n == 1 {
        PLMap::identity()
    } else {
        tent(n).unwrap()
    }
}

/// Maps of the unit interval onto itself built from tents and orientation flips.
fn unit_map() -> impl Strategy<Value = PLMap> {
    (1u32..=5, any::<bool>()).prop_map(|(n, flip)| {
        let f = t(n);
        if flip {
            compose(&PLMap::linear(r(0, 1), r(1, 1), r(1, 1), r(0, 1)), &f).unwrap()
        } else {
            f
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn rat_arithmetic_matches_cross_multiplication((an, ad) in small_rat(), (bn, bd) in small_rat()) {
        let (a, b) = (r(an, ad), r(bn, bd));
        prop_assert_eq!(&(&a + &b) - &b, a.clone());
        prop_assert_eq!(&a * &b, r(an * bn, ad * bd));
        prop_assert_eq!(a < b, (an as i128) * (bd as i128) < (bn as i128) * (ad as i128));
        if bn != 0 {
            prop_assert_eq!(&(&a * &b) / &b, a.clone());
        }
    }

    #[test]
    fn rat_survives_big_intermediates(k in 1u32..40) {
        let big = (0..3 * k).fold(r(1, 1), |acc, _| &acc * &r(3, 1));
        let x = &(&big + &r(1, 7)) - &big;
        prop_assert_eq!(x, r(1, 7));
    }

    #[test]
    fn composition_agrees_with_evaluation(f in unit_map(), g in unit_map(), x in unit_rat()) {
        let h = compose(&f, &g).unwrap();
        prop_assert_eq!(h.eval(&x).unwrap(), f.eval(&g.eval(&x).unwrap()).unwrap());
    }

    #[test]
    fn tents_multiply(n in 1u32..=6, m in 1u32..=6) {
        prop_assert_eq!(compose(&t(n), &t(m)).unwrap(), t(n * m));
        prop_assert_eq!(compose(&t(m), &t(n)).unwrap(), t(n * m));
    }

    #[test]
    fn lap_count_of_tent_iterates(n in 2u32..=4, k in 1usize..=5) {
        prop_assert_eq!(iterate(&t(n), k).unwrap().lap_count(), (n as usize).pow(k as u32));
    }

    #[test]
    fn param_graph_contains_its_parameterization(f in unit_map(), g in unit_map(), s in unit_rat()) {
        let rel = param_graph(&f, &g).unwrap();
        let (x, y) = (f.eval(&s).unwrap(), g.eval(&s).unwrap());
        prop_assert!(rel.evaluate_at(&x).contains(&y));
        prop_assert!(inverse_rel(&rel).evaluate_at(&y).contains(&x));
    }

    #[test]
    fn inverse_is_an_involution(f in unit_map(), g in unit_map()) {
        let rel = param_graph(&f, &g).unwrap();
        prop_assert!(rel_equals(&inverse_rel(&inverse_rel(&rel)), &rel));
    }

    #[test]
    fn graphs_compose_like_maps(f in unit_map(), g in unit_map()) {
        let lhs = compose_rel(&graph_of(&f), &graph_of(&g)).unwrap();
        prop_assert!(rel_equals(&lhs, &graph_of(&compose(&f, &g).unwrap())));
    }

    #[test]
    fn composed_fibers_are_chained_fibers(n in 1u32..=4, m in 1u32..=4, x in unit_rat()) {
        let a = param_graph(&t(n), &t(m)).unwrap();
        let b = inverse_rel(&graph_of(&t(m)));
        let c = compose_rel(&b, &a).unwrap();
        let mids = a.evaluate_at(&x);
        prop_assert_eq!(c.evaluate_at(&x).parts, merge_intervals(b.image_of_set(&mids.parts)));
    }

    #[test]
    fn diagonal_keeps_points_consistent(x in unit_rat(), top in any::<bool>(), d in 2usize..=6) {
        let sys = DiagonalSystem::constant(&t(2), &t(3), 8);
        let p = if top { TruncatedPoint::from_top(&sys, x, d).unwrap() } else { TruncatedPoint::from_base(&sys, x, d).unwrap() };
        prop_assert!(p.check(&sys).is_ok());
        let q = apply_diagonal(&sys, &p).unwrap();
        prop_assert_eq!(q.depth(), d - 1);
        prop_assert!(q.check(&sys).is_ok());
        // The diagonal map commutes with truncation.
        prop_assert_eq!(apply_diagonal(&sys, &p.truncate(d - 1)).unwrap(), q.truncate(d - 2));
    }

    #[test]
    fn truncated_metric_is_a_metric(a in unit_rat(), b in unit_rat(), c in unit_rat()) {
        let sys = DiagonalSystem::constant(&t(2), &t(3), 6);
        let [p, q, s] = [a, b, c].map(|x| TruncatedPoint::from_top(&sys, x, 5).unwrap());
        let d = |u: &TruncatedPoint, v: &TruncatedPoint| truncated_metric(u, v).unwrap().value;
        prop_assert_eq!(d(&p, &p), 0.0);
        prop_assert_eq!(d(&p, &q), d(&q, &p));
        prop_assert!(d(&p, &s) <= d(&p, &q) + d(&q, &s) + 1e-12);
    }
}

#[test]
fn grid_orbits_lift_and_project() {
    let sys = DiagonalSystem::constant(&t(2), &t(3), 8);
    let gamma = param_graph(&t(2), &t(3)).unwrap();
    for n in 1..=3 {
        let orbits = enumerate_orbits(&gamma, n, &r(1, 12)).unwrap();
        assert!(!orbits.orbits.is_empty());
        for o in &orbits.orbits {
            for level in 0..2 {
                let p = lift_orbit(&sys, level, o, level + n + 1).unwrap();
                assert!(p.check(&sys).is_ok());
                assert!(projects_onto(&sys, level, &p, o).unwrap(), "orbit {o:?} at level {level}");
            }
        }
    }
}

#[test]
fn separated_counts_grow_as_eps_shrinks() {
    let gamma = param_graph(&t(2), &t(3)).unwrap();
    for n in 1..=3 {
        let tr = Trajectories::from_orbits(&enumerate_orbits(&gamma, n, &r(1, 16)).unwrap());
        let mut prev = 0;
        for eps in [0.5, 0.25, 0.125, 0.0625] {
            let s = separated_count(&tr, eps);
            assert!(s.value >= prev && s.value <= tr.len());
            assert!(spanning_count(&tr, eps).value <= s.value);
            prev = s.value;
        }
    }
}

#[test]
fn horseshoe_certificates_satisfy_the_definition() {
    for (n, m) in [(2, 3), (3, 4), (2, 5)] {
        let rel = param_graph(&t(n), &t(m)).unwrap();
        let h = largest_horseshoe(&rel).unwrap();
        assert!(verify_horseshoe(&rel, &h.intervals));
        // Disjoint, and every set's image covers all of them.
        for w in h.intervals.windows(2) {
            assert!(w[0].hi < w[1].lo);
        }
        for a in &h.intervals {
            let img = rel.image_of_interval(a);
            for b in &h.intervals {
                assert!(img.iter().any(|i: &Interval| i.contains_interval(b)), "{a} does not cover {b}");
            }
        }
    }
}
