use std::collections::BTreeMap;

use perc_core::enumerate::{check_self_duality, cone_bond_count, size_law, survival_probability, ENUMERATION_CAP};
use perc_core::processes::run_trial;
use perc_core::{Error, WetRow};
use proptest::prelude::*;

#[test]
fn one_level_closed_form() {
    for p in [0.0, 0.25, 0.5, 0.8, 1.0] {
        let q = 1.0 - p;
        assert!((survival_probability(p, 1).unwrap() - (1.0 - q * q)).abs() < 1e-15);
        let law = size_law(p, 1).unwrap();
        let get = |k| law.get(&k).copied().unwrap_or(0.0);
        assert!((get(0) - q * q).abs() < 1e-15);
        assert!((get(1) - 2.0 * p * q).abs() < 1e-15);
        assert!((get(2) - p * p).abs() < 1e-15);
    }
}

#[test]
fn laws_are_normalized() {
    for h in 1..=4 {
        for p in [0.3, 0.5, 0.8] {
            let total: f64 = size_law(p, h).unwrap().values().sum();
            assert!((total - 1.0).abs() < 1e-12);
            let zero = size_law(p, h).unwrap().get(&0).copied().unwrap_or(0.0);
            assert!((1.0 - zero - survival_probability(p, h).unwrap()).abs() < 1e-12);
        }
    }
}

#[test]
fn survival_decreases_with_height_and_increases_with_p() {
    let mut last = 1.0;
    for h in 1..=4 {
        let s = survival_probability(0.6, h).unwrap();
        assert!(s <= last + 1e-15);
        last = s;
    }
    let mut prev = 0.0;
    for k in 0..=10 {
        let s = survival_probability(k as f64 / 10.0, 3).unwrap();
        assert!(s >= prev - 1e-15);
        prev = s;
    }
}

#[test]
fn cap_is_enforced() {
    let origin = WetRow::from_sites(0, [0]).unwrap();
    assert!(cone_bond_count(&origin, 4) <= ENUMERATION_CAP);
    assert!(cone_bond_count(&origin, 5) > ENUMERATION_CAP);
    assert!(matches!(
        survival_probability(0.5, 5),
        Err(Error::InfeasibleEnumeration { .. })
    ));
}

#[test]
fn monte_carlo_matches_enumeration() {
    let trials = 20_000u64;
    for p in [0.3, 0.7] {
        let h = 3;
        let exact = size_law(p, h).unwrap();
        let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
        for t in 0..trials {
            let r = run_trial(p, h, 11, t).unwrap();
            *counts.entry(r.size_path[h as usize]).or_default() += 1;
        }
        for (k, &prob) in &exact {
            let observed = counts.get(k).copied().unwrap_or(0) as f64 / trials as f64;
            let se = (prob * (1.0 - prob) / trials as f64).sqrt().max(1e-9);
            assert!((observed - prob).abs() <= 4.0 * se, "p={p} size={k}: {observed} vs {prob}");
        }
        assert!(counts.keys().all(|k| exact.contains_key(k)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn self_duality(
        a in prop::collection::btree_set(-1i64..=1, 1..3),
        b in prop::collection::btree_set(-1i64..=1, 1..3),
        p in 0.05f64..0.95,
    ) {
        let h = 2;
        let a = WetRow::from_sites(0, a.into_iter().map(|k| 2 * k)).unwrap();
        let b = WetRow::from_sites(h, b.into_iter().map(|k| 2 * k)).unwrap();
        let (fwd, bwd) = check_self_duality(&a, &b, p, h).unwrap();
        prop_assert!((fwd - bwd).abs() < 1e-12, "{} vs {}", fwd, bwd);
    }
}
