use perc_core::lattice::CoupledEvolution;
use perc_core::processes::{coupling_check, edges_coincide, run_trial, run_trial_observed, trial_window};
use perc_core::stats::{ks_normal, ks_two_sample};
use perc_core::{evolve_coupled, BondRealization, BondWindow, WetRow};
use proptest::prelude::*;

const HALF: i64 = 40;
const HEIGHT: u32 = 30;

fn even_sites() -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec((-HALF / 2..=HALF / 2).prop_map(|k| 2 * k), 1..12)
}

fn trajectory(sites: &[i64], p: f64, seed: u64, trial: u64) -> Vec<WetRow> {
    let bonds = BondRealization::derived(p, BondWindow::centered(HALF, HEIGHT), seed, trial).unwrap();
    let row = WetRow::from_sites(0, sites.iter().copied()).unwrap();
    evolve_coupled(&[row], &bonds, HEIGHT).unwrap().remove(0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn monotone_in_initial_set(a in even_sites(), b in even_sites(), p in 0.0f64..=1.0, seed in any::<u64>()) {
        let union: Vec<i64> = a.iter().chain(&b).copied().collect();
        let bonds = BondRealization::derived(p, BondWindow::centered(HALF, HEIGHT), seed, 0).unwrap();
        let rows = [
            WetRow::from_sites(0, a.iter().copied()).unwrap(),
            WetRow::from_sites(0, union.iter().copied()).unwrap(),
        ];
        let mut evo = CoupledEvolution::new(&rows, &bonds).unwrap();
        for _ in 0..HEIGHT {
            evo.advance().unwrap();
            prop_assert!(evo.rows()[0].is_subset_of(&evo.rows()[1]));
        }
    }

    #[test]
    fn union_of_initial_sets_is_additive(a in even_sites(), b in even_sites(), p in 0.0f64..=1.0, seed in any::<u64>()) {
        let union: Vec<i64> = a.iter().chain(&b).copied().collect();
        let ta = trajectory(&a, p, seed, 3);
        let tb = trajectory(&b, p, seed, 3);
        let tu = trajectory(&union, p, seed, 3);
        for ((ra, rb), ru) in ta.iter().zip(&tb).zip(&tu) {
            let mut joined: Vec<i64> = ra.sites().chain(rb.sites()).collect();
            joined.sort_unstable();
            joined.dedup();
            prop_assert_eq!(joined, ru.sites().collect::<Vec<_>>());
        }
    }

    #[test]
    fn monotone_in_p(sites in even_sites(), p1 in 0.0f64..=1.0, p2 in 0.0f64..=1.0, seed in any::<u64>()) {
        let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
        let a = trajectory(&sites, lo, seed, 1);
        let b = trajectory(&sites, hi, seed, 1);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(x.is_subset_of(y));
        }
    }

    #[test]
    fn parity_and_light_cone(sites in even_sites(), p in 0.0f64..=1.0, seed in any::<u64>()) {
        let lo = *sites.iter().min().unwrap();
        let hi = *sites.iter().max().unwrap();
        for row in trajectory(&sites, p, seed, 2) {
            let n = row.level() as i64;
            for y in row.sites() {
                prop_assert_eq!((y + n).rem_euclid(2), 0);
                prop_assert!(lo - n <= y && y <= hi + n);
            }
        }
    }

    #[test]
    fn trials_are_reproducible(p in 0.0f64..=1.0, seed in any::<u64>(), trial in any::<u64>()) {
        let a = run_trial(p, 25, seed, trial).unwrap();
        let b = run_trial(p, 25, seed, trial).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn bonds_do_not_depend_on_window(seed in any::<u64>(), extra in 0i64..20) {
        let small = BondRealization::derived(0.6, BondWindow::centered(10, 10), seed, 5).unwrap();
        let big = BondRealization::derived(0.6, BondWindow::centered(10 + extra, 10), seed, 5).unwrap();
        let row = WetRow::interval(0, -10, 10);
        let a = evolve_coupled(std::slice::from_ref(&row), &small, 10).unwrap();
        let b = evolve_coupled(&[row], &big, 10).unwrap();
        for (x, y) in a[0].iter().zip(&b[0]) {
            prop_assert_eq!(x.sites().collect::<Vec<_>>(), y.sites().collect::<Vec<_>>());
        }
    }

    #[test]
    fn coupling_identity_holds(p in 0.5f64..=1.0, seed in any::<u64>(), trial in 0u64..1000) {
        let mut failures = Vec::new();
        run_trial_observed(p, 40, seed, trial, |rows| {
            if rows.origin.is_empty() {
                return;
            }
            let report = coupling_check(rows).unwrap();
            if !report.holds || edges_coincide(rows) != Some(true) {
                failures.push(rows.level);
            }
        }).unwrap();
        prop_assert!(failures.is_empty(), "violations at levels {:?}", failures);
    }

    #[test]
    fn ks_is_affine_invariant(
        xs in prop::collection::vec(-50.0f64..50.0, 100..300),
        shift in -10.0f64..10.0,
        scale in 0.1f64..10.0,
    ) {
        let ys: Vec<f64> = xs.iter().map(|x| scale * x + shift).collect();
        let a = ks_normal(&xs, 1.0, 4.0).unwrap();
        let b = ks_normal(&ys, scale + shift, 4.0 * scale * scale).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
        prop_assert!(ks_two_sample(&xs, &xs).unwrap() == 0.0);
        let c = ks_two_sample(&xs, &ys).unwrap();
        prop_assert!((0.0..=1.0).contains(&c));
    }
}

#[test]
fn trial_window_is_wide_enough() {
    let w = trial_window(50);
    assert!(w.x_min() <= -100 && w.x_max() >= 100);
    assert!(w.height() >= 50);
}
