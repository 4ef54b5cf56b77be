//! The four coupled processes of one trial.
//!
//! Every trial drives, on a single bond realization,
//!
//! * `origin`: started from `{0}`,
//! * `full`: started from all of `2Z`,
//! * `left`: started from `{..., -2, 0}`,
//! * `right`: started from `{0, 2, ...}`.
//!
//! The infinite initial sets are cut to `[-2N, 2N]` for horizon `N`. A site at
//! level `n` only sees initial sites within distance `n`, so on `[-N, N]` the
//! cut processes agree with the infinite ones at every level up to `N`. The
//! edge comparison `r_n >= l_n` is exact as well: whenever a cut half-line
//! edge leaves `[-N, N]` the true edge lies on the same side.

use std::io::{self, Write};

use crate::error::{argument, Error, Result};
use crate::lattice::{BondRealization, BondWindow, CoupledEvolution, WetRow};

/// Trials whose `tau` has fewer than this many confirming levels after it are
/// flagged provisional.
pub const PROVISIONAL_WINDOW: u32 = 20;

pub const TRIAL_CSV_HEADER: &str = "trial,level,size,rminus,lplus,diameter,survived,tau";

/// Rows of the four processes at one level.
#[derive(Clone, Copy)]
pub struct LevelRows<'a> {
    pub level: u32,
    pub origin: &'a WetRow,
    pub full: &'a WetRow,
    pub left: &'a WetRow,
    pub right: &'a WetRow,
}

impl LevelRows<'_> {
    /// `r_n^-`, the right edge of the left half-line process.
    pub fn rminus(&self) -> Option<i64> {
        self.left.max()
    }

    /// `l_n^+`, the left edge of the right half-line process.
    pub fn lplus(&self) -> Option<i64> {
        self.right.min()
    }
}

pub fn trial_window(horizon: u32) -> BondWindow {
    BondWindow::centered(2 * horizon as i64, horizon)
}

fn initial_rows(horizon: u32) -> [WetRow; 4] {
    let reach = 2 * horizon as i64;
    [
        WetRow::from_sites(0, [0]).expect("origin is a lattice site"),
        WetRow::interval(0, -reach, reach),
        WetRow::interval(0, -reach, 0),
        WetRow::interval(0, 0, reach),
    ]
}

/// Runs one trial to `horizon` and hands every level (including level 0) to
/// `observe`.
pub fn run_trial_observed(
    p: f64,
    horizon: u32,
    seed: u64,
    trial: u64,
    mut observe: impl FnMut(&LevelRows),
) -> Result<()> {
    if horizon == 0 {
        return Err(argument("horizon must be at least 1"));
    }
    let bonds = BondRealization::derived(p, trial_window(horizon), seed, trial)?;
    let mut evo = CoupledEvolution::new(&initial_rows(horizon), &bonds)?;
    loop {
        let rows = evo.rows();
        observe(&LevelRows {
            level: evo.level(),
            origin: &rows[0],
            full: &rows[1],
            left: &rows[2],
            right: &rows[3],
        });
        if evo.level() == horizon {
            return Ok(());
        }
        evo.advance()?;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tau {
    Observed { level: u32, provisional: bool },
    NotObserved,
}

impl Tau {
    pub fn level(&self) -> Option<u32> {
        match self {
            Tau::Observed { level, .. } => Some(*level),
            Tau::NotObserved => None,
        }
    }

    /// `tau >= n`; an unobserved coupling counts as beyond the horizon.
    pub fn at_least(&self, n: u32) -> bool {
        match self {
            Tau::Observed { level, .. } => *level >= n,
            Tau::NotObserved => true,
        }
    }
}

/// Per-level summaries of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: u64,
    pub horizon: u32,
    /// `|xi_n^O|` for `n = 0..=N`.
    pub size_path: Vec<u64>,
    pub rminus_path: Vec<Option<i64>>,
    pub lplus_path: Vec<Option<i64>>,
    /// `max - min` of the origin process; `None` once it is extinct.
    pub diameter_path: Vec<Option<u64>>,
    /// `xi_N^O` non-empty, the finite-horizon stand-in for percolation.
    pub survived: bool,
    pub tau: Tau,
}

impl TrialRecord {
    /// First level with an empty origin process.
    pub fn extinction_level(&self) -> Option<u32> {
        self.size_path.iter().position(|&s| s == 0).map(|n| n as u32)
    }

    /// Writes one CSV line per level, every `stride` levels (the last level is
    /// always written).
    pub fn write_csv<W: Write>(&self, out: &mut W, stride: u32) -> io::Result<()> {
        let stride = stride.max(1);
        let tau = match self.tau.level() {
            Some(t) => t.to_string(),
            None => String::new(),
        };
        let opt = |v: Option<i64>| v.map(|x| x.to_string()).unwrap_or_default();
        for n in 0..=self.horizon {
            if n % stride != 0 && n != self.horizon {
                continue;
            }
            let i = n as usize;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                self.trial,
                n,
                self.size_path[i],
                opt(self.rminus_path[i]),
                opt(self.lplus_path[i]),
                self.diameter_path[i].map(|d| d.to_string()).unwrap_or_default(),
                u8::from(self.survived),
                tau
            )?;
        }
        Ok(())
    }
}

pub fn run_trial(p: f64, horizon: u32, seed: u64, trial: u64) -> Result<TrialRecord> {
    let len = horizon as usize + 1;
    let mut record = TrialRecord {
        trial,
        horizon,
        size_path: Vec::with_capacity(len),
        rminus_path: Vec::with_capacity(len),
        lplus_path: Vec::with_capacity(len),
        diameter_path: Vec::with_capacity(len),
        survived: false,
        tau: Tau::NotObserved,
    };
    run_trial_observed(p, horizon, seed, trial, |rows| {
        record.size_path.push(rows.origin.len());
        record.rminus_path.push(rows.rminus());
        record.lplus_path.push(rows.lplus());
        record.diameter_path.push(rows.origin.diameter());
    })?;
    record.survived = record.size_path[horizon as usize] > 0;
    record.tau = tau_scan(&record);
    Ok(record)
}

/// First level `n` with `r_n^- = l_n^+` after which `r_m^- >= l_m^+` for every
/// observed `m > n`. Absent edges count as crossed.
pub fn tau_scan(record: &TrialRecord) -> Tau {
    let crossed = |m: usize| match (record.rminus_path[m], record.lplus_path[m]) {
        (Some(r), Some(l)) => r < l,
        _ => true,
    };
    let meets = |m: usize| matches!((record.rminus_path[m], record.lplus_path[m]), (Some(r), Some(l)) if r == l);
    let last = record.horizon as usize;
    let start = match (0..=last).rev().find(|&m| crossed(m)) {
        Some(m) => m + 1,
        None => 0,
    };
    match (start..=last).find(|&n| meets(n)) {
        Some(n) => Tau::Observed {
            level: n as u32,
            provisional: record.horizon - (n as u32) < PROVISIONAL_WINDOW,
        },
        None => Tau::NotObserved,
    }
}

/// Outcome of comparing `xi_n^O` with `xi_n^{2Z}` cut to the edge interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CouplingReport {
    pub level: u32,
    pub holds: bool,
    /// `(min, max)` of `{l_n^+, r_n^-}`.
    pub interval: (i64, i64),
}

/// Checks `xi_n^O = xi_n^{2Z} ∩ [l_n^+, r_n^-]` site by site. Only defined
/// while the origin process is alive.
pub fn coupling_check(rows: &LevelRows) -> Result<CouplingReport> {
    if rows.origin.is_empty() {
        return Err(Error::NotApplicable(format!(
            "origin process is extinct at level {}",
            rows.level
        )));
    }
    let (Some(r), Some(l)) = (rows.rminus(), rows.lplus()) else {
        // The origin process is inside both half-line processes, so this
        // cannot happen on a consistent realization.
        return Ok(CouplingReport {
            level: rows.level,
            holds: false,
            interval: (0, 0),
        });
    };
    let (lo, hi) = (l.min(r), l.max(r));
    Ok(CouplingReport {
        level: rows.level,
        holds: rows.full.restricted(lo, hi) == *rows.origin,
        interval: (lo, hi),
    })
}

/// `max xi_n^O = r_n^-` and `min xi_n^O = l_n^+`; `None` when the origin
/// process is extinct.
pub fn edges_coincide(rows: &LevelRows) -> Option<bool> {
    let (lo, hi) = (rows.origin.min()?, rows.origin.max()?);
    Some(rows.rminus() == Some(hi) && rows.lplus() == Some(lo))
}

/// Half-width of the summation window `[-a, a]` approximating
/// `[-alpha n, alpha n]`, rounded inward to a site of level `n`.
pub fn summation_half_width(alpha: f64, level: u32) -> i64 {
    let mut a = (alpha * level as f64).floor() as i64;
    if (a + level as i64).rem_euclid(2) != 0 {
        a -= 1;
    }
    a
}

/// What the CLT statistics need from one trial at one level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelObservation {
    pub trial: u64,
    pub level: u32,
    pub size: u64,
    pub diameter: Option<u64>,
    pub rminus: Option<i64>,
    pub lplus: Option<i64>,
    /// Survival to the horizon of the run, not just to `level`.
    pub survived: bool,
    /// `(a, count)`: wet sites of the full-line process in `[-a, a]`, when a
    /// summation window was requested.
    pub window: Option<(i64, u64)>,
}

impl LevelObservation {
    pub fn from_record(record: &TrialRecord, level: u32) -> Result<Self> {
        if level > record.horizon {
            return Err(argument(format!(
                "level {level} is beyond the trial horizon {}",
                record.horizon
            )));
        }
        let i = level as usize;
        Ok(LevelObservation {
            trial: record.trial,
            level,
            size: record.size_path[i],
            diameter: record.diameter_path[i],
            rminus: record.rminus_path[i],
            lplus: record.lplus_path[i],
            survived: record.survived,
            window: None,
        })
    }
}

/// Runs a trial to `horizon` and keeps only the requested levels. With
/// `window_alpha`, the full-line process is also summed over the window of
/// [`summation_half_width`].
pub fn observe_trial(
    p: f64,
    horizon: u32,
    seed: u64,
    trial: u64,
    levels: &[u32],
    window_alpha: Option<f64>,
) -> Result<Vec<LevelObservation>> {
    if let Some(&bad) = levels.iter().find(|&&n| n > horizon) {
        return Err(argument(format!("level {bad} is beyond the horizon {horizon}")));
    }
    let mut out = Vec::with_capacity(levels.len());
    run_trial_observed(p, horizon, seed, trial, |rows| {
        if !levels.contains(&rows.level) {
            return;
        }
        let window = window_alpha.map(|alpha| {
            let a = summation_half_width(alpha, rows.level);
            (a, rows.full.count_in(-a, a))
        });
        out.push(LevelObservation {
            trial,
            level: rows.level,
            size: rows.origin.len(),
            diameter: rows.origin.diameter(),
            rminus: rows.rminus(),
            lplus: rows.lplus(),
            survived: false,
            window,
        });
    })?;
    let survived = out
        .iter()
        .find(|o| o.level == horizon)
        .map(|o| o.size > 0);
    let survived = match survived {
        Some(s) => s,
        // The horizon was not among the requested levels; re-derive it.
        None => run_trial(p, horizon, seed, trial)?.survived,
    };
    for o in &mut out {
        o.survived = survived;
    }
    Ok(out)
}
