use mpholes::holes::{Hole, HoleFile};
use mpholes::induced::BranchTable;
use mpholes::interval_set::IntervalSet;
use mpholes::map_core::{
    cylinder_realize, eval_map, inverse_branch, itinerary, parse_word, renewal_endpoints, word_string, Branch,
};
use mpholes::MapParams;
use proptest::prelude::*;

fn word() -> impl Strategy<Value = Vec<Branch>> {
    prop::collection::vec(prop_oneof![Just(Branch::L), Just(Branch::R)], 1..10)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn inverse_branches_invert(g in 0.05f64..0.95, y in 0.0f64..1.0, right in any::<bool>()) {
        let p = MapParams::new(g).unwrap();
        let b = if right { Branch::R } else { Branch::L };
        let x = inverse_branch(p, b, y).unwrap();
        prop_assert_eq!(mpholes::map_core::branch_of(x), b);
        let back = eval_map(p, x).unwrap();
        prop_assert!((back - y).abs() < 1e-12, "f(f_b^-1(y)) = {back}, y = {y}");
    }

    #[test]
    fn word_text_roundtrip(w in word()) {
        prop_assert_eq!(parse_word(&word_string(&w)).unwrap(), w);
    }

    #[test]
    fn cylinders_nest(g in 0.1f64..0.9, w in word(), tail in word()) {
        let p = MapParams::new(g).unwrap();
        let parent = cylinder_realize(p, &w).unwrap();
        let mut long = w.clone();
        long.extend_from_slice(&tail);
        // deep L runs can underflow to an empty interval; that is fine to skip
        if let Ok(child) = cylinder_realize(p, &long) {
            prop_assert!(child.lo >= parent.lo && child.hi <= parent.hi);
        }
    }

    #[test]
    fn cylinder_midpoint_follows_its_word(g in 0.1f64..0.9, w in prop::collection::vec(prop_oneof![Just(Branch::L), Just(Branch::R)], 1..6)) {
        let p = MapParams::new(g).unwrap();
        let c = cylinder_realize(p, &w).unwrap();
        let mid = 0.5 * (c.lo + c.hi);
        prop_assert_eq!(itinerary(p, mid, w.len()), w);
    }

    #[test]
    fn interval_set_measure_is_subadditive(parts in prop::collection::vec((0.0f64..1.0, 0.0f64..0.2), 0..8)) {
        let parts: Vec<(f64, f64)> = parts.into_iter().map(|(a, l)| (a, a + l)).collect();
        let s = IntervalSet::from_parts(parts.clone());
        let total: f64 = parts.iter().map(|(a, b)| b - a).sum();
        prop_assert!(s.measure() <= total + 1e-12);
        for w in s.parts().windows(2) {
            prop_assert!(w[0].1 < w[1].0, "pieces not disjoint and sorted");
        }
        for &(a, b) in &parts {
            if b > a {
                prop_assert!(s.contains(0.5 * (a + b)));
            }
        }
    }

    #[test]
    fn markov_hole_json_roundtrip(cells in prop::collection::btree_set("[LR]{3}", 1..4)) {
        let p = MapParams::new(0.5).unwrap();
        let cells: Vec<String> = cells.into_iter().collect();
        let text = serde_json::json!({"type": "markov", "N0": 3, "cells": cells}).to_string();
        let file = HoleFile::parse(&text).unwrap();
        let holes = file.holes(p).unwrap();
        prop_assert_eq!(holes.len(), 1);
        let direct = Hole::markov(p, 3, &cells).unwrap();
        prop_assert!((holes[0].measure() - direct.measure()).abs() < 1e-15);
        let total: f64 = cells.iter().map(|c| cylinder_realize(p, &parse_word(c).unwrap()).unwrap().len()).sum();
        prop_assert!((direct.measure() - total).abs() < 1e-12);
    }
}

#[test]
fn renewal_cells_shrink_and_tile() {
    for g in [0.2, 0.5, 0.9] {
        let p = MapParams::new(g).unwrap();
        let r = renewal_endpoints(p, 300).unwrap();
        for n in 2..=300 {
            assert!(r.len[n] < r.len[n - 1]);
            let (a, b) = r.cell(n);
            assert!(((b - a) - r.len[n]).abs() <= 1e-12 * r.len[n].max(1e-300) + 1e-17);
        }
        // |J_n| n^{1+1/g} settles to a constant; at small g the log correction is still large here
        if g < 0.5 {
            continue;
        }
        let k = |n: usize| r.len[n] * (n as f64).powf(p.tail_exponent());
        let (early, late) = ((k(150) / k(75) - 1.0).abs(), (k(300) / k(150) - 1.0).abs());
        assert!(late < early && late < 0.1, "g={g}: ratio drift {early} then {late}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn return_branches_invert(n in 0usize..200, y in 0.5f64..1.0) {
        let table = shared_table();
        let x = table.xi(n, y);
        let (a, b) = table.y_cell(n);
        prop_assert!(x >= a - 1e-15 && x <= b + 1e-15, "xi_{n}({y}) = {x} outside [{a}, {b}]");
        let back = table.forward(n, x);
        prop_assert!((back - y).abs() < 1e-9, "F(xi_{n}(y)) = {back}, y = {y}");
    }
}

fn shared_table() -> &'static BranchTable {
    use std::sync::OnceLock;
    static T: OnceLock<BranchTable> = OnceLock::new();
    T.get_or_init(|| BranchTable::build(MapParams::new(0.5).unwrap(), 200).unwrap())
}
