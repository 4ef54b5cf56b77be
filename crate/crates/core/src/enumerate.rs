//! Exact probabilities by summing over every bond configuration.
//!
//! The configurations of the `B` bonds in the forward cone of the initial row
//! are visited in Gray-code order, so consecutive configurations differ in one
//! bond. Bonds are numbered from the top level down, which means most flips
//! only require re-stepping the last few levels.

use std::collections::BTreeMap;

use crate::error::{argument, check_probability, Error, Result};
use crate::lattice::{bit_of, lane_of, step_words, word_of, WetRow};

/// Largest number of bonds the oracle will enumerate (2^24 configurations).
pub const ENUMERATION_CAP: usize = 24;

struct Bond {
    step: usize,
    word: usize,
    bit: u32,
    dir: usize,
}

/// Number of bonds leaving the cone `[min - k, max + k]` at the levels
/// `start .. start + horizon`.
pub fn cone_bond_count(initial: &WetRow, horizon: u32) -> usize {
    match (initial.min(), initial.max()) {
        (Some(lo), Some(hi)) => {
            let width = ((hi - lo) / 2 + 1) as usize;
            (0..horizon as usize).map(|k| 2 * (width + k)).sum()
        }
        _ => 0,
    }
}

/// Calls `visit(weight, trajectory)` once per configuration, where
/// `trajectory[k]` is the row at level `initial.level() + k`.
pub fn for_each_configuration(
    initial: &WetRow,
    p: f64,
    horizon: u32,
    mut visit: impl FnMut(f64, &[WetRow]),
) -> Result<()> {
    check_probability(p)?;
    let bonds = cone_bond_count(initial, horizon);
    if bonds > ENUMERATION_CAP {
        return Err(Error::InfeasibleEnumeration {
            bonds,
            cap: ENUMERATION_CAP,
        });
    }
    let level = initial.level();
    let (Some(lo), Some(hi)) = (initial.min(), initial.max()) else {
        // Nothing wet, nothing random.
        let rows: Vec<WetRow> = (0..=horizon).map(|k| WetRow::empty(level + k)).collect();
        visit(1.0, &rows);
        return Ok(());
    };

    let c0 = lane_of(lo, level);
    let width = (lane_of(hi, level) - c0 + 1) as usize;
    let base = word_of(c0);
    let len = (word_of(c0 + (width + horizon as usize) as i64) - base + 1) as usize;
    let mut rows: Vec<WetRow> = (0..=horizon)
        .map(|k| WetRow::zeroed(level + k, base, len))
        .collect();
    rows[0] = initial.respan(base, len)?;

    let mut slots = Vec::with_capacity(bonds);
    for step in (0..horizon as usize).rev() {
        for c in c0..c0 + (width + step) as i64 {
            for dir in 0..2 {
                slots.push(Bond {
                    step,
                    word: (word_of(c) - base) as usize,
                    bit: bit_of(c),
                    dir,
                });
            }
        }
    }
    debug_assert_eq!(slots.len(), bonds);

    let mut masks = vec![[vec![0u64; len], vec![0u64; len]]; horizon as usize];
    let weights: Vec<f64> = (0..=bonds)
        .map(|open| p.powi(open as i32) * (1.0 - p).powi((bonds - open) as i32))
        .collect();

    let restep = |from: usize, rows: &mut [WetRow], masks: &[[Vec<u64>; 2]]| {
        for k in from..horizon as usize {
            let (done, rest) = rows.split_at_mut(k + 1);
            let carry = step_words(done[k].words(), &masks[k][0], &masks[k][1], rest[0].words_mut());
            debug_assert_eq!(carry, 0);
        }
    };

    restep(0, &mut rows, &masks);
    visit(weights[0], &rows);
    let mut open = 0usize;
    for i in 1u64..(1u64 << bonds) {
        let slot = &slots[i.trailing_zeros() as usize];
        let mask = &mut masks[slot.step][slot.dir][slot.word];
        *mask ^= 1 << slot.bit;
        if *mask >> slot.bit & 1 == 1 {
            open += 1;
        } else {
            open -= 1;
        }
        restep(slot.step, &mut rows, &masks);
        visit(weights[open], &rows);
    }
    Ok(())
}

/// Exact expectation of `statistic` over all configurations; indicators give
/// probabilities.
pub fn enumerate_exact(
    initial: &WetRow,
    p: f64,
    horizon: u32,
    mut statistic: impl FnMut(&[WetRow]) -> f64,
) -> Result<f64> {
    let mut sum = Neumaier::default();
    for_each_configuration(initial, p, horizon, |w, rows| {
        if w > 0.0 {
            sum.add(w * statistic(rows));
        }
    })?;
    Ok(sum.total())
}

/// Exact law of a discrete functional of the trajectory.
pub fn enumerate_law<K: Ord>(
    initial: &WetRow,
    p: f64,
    horizon: u32,
    mut key: impl FnMut(&[WetRow]) -> K,
) -> Result<BTreeMap<K, f64>> {
    let mut law: BTreeMap<K, Neumaier> = BTreeMap::new();
    for_each_configuration(initial, p, horizon, |w, rows| {
        if w > 0.0 {
            law.entry(key(rows)).or_default().add(w);
        }
    })?;
    Ok(law.into_iter().map(|(k, s)| (k, s.total())).collect())
}

/// `P(the origin's row is non-empty at level h)`.
pub fn survival_probability(p: f64, horizon: u32) -> Result<f64> {
    let origin = WetRow::from_sites(0, [0])?;
    enumerate_exact(&origin, p, horizon, |rows| {
        f64::from(!rows[rows.len() - 1].is_empty())
    })
}

/// Law of `|xi_h|` for the process started from the origin.
pub fn size_law(p: f64, horizon: u32) -> Result<BTreeMap<u64, f64>> {
    let origin = WetRow::from_sites(0, [0])?;
    enumerate_law(&origin, p, horizon, |rows| rows[rows.len() - 1].len())
}

/// Both sides of the duality identity,
/// `(P(xi_n^A meets B), P(xi_n^B meets A))`, where `A` sits at its level and
/// `B` at level `A.level + horizon`.
pub fn check_self_duality(a: &WetRow, b: &WetRow, p: f64, horizon: u32) -> Result<(f64, f64)> {
    if b.level() != a.level() + horizon {
        return Err(argument(format!(
            "B must sit at level {} (A level + horizon), found {}",
            a.level() + horizon,
            b.level()
        )));
    }
    let b_sites: Vec<i64> = b.sites().collect();
    let a_sites: Vec<i64> = a.sites().collect();
    let forward = enumerate_exact(a, p, horizon, |rows| {
        let last = &rows[rows.len() - 1];
        f64::from(b_sites.iter().any(|&y| last.contains(y)))
    })?;
    // The reversed lattice is the same lattice, so the dual runs forward from B.
    let backward = enumerate_exact(b, p, horizon, |rows| {
        let last = &rows[rows.len() - 1];
        f64::from(a_sites.iter().any(|&y| last.contains(y)))
    })?;
    Ok((forward, backward))
}

/// Compensated summation.
#[derive(Default, Clone, Copy)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}
