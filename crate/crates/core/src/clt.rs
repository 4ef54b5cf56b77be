//! Standardized cluster-size statistics and their distance to a normal law.
//!
//! Three statistics are built from per-level observations:
//!
//! * [`StatisticKind::DiameterScaled`]: `(|xi_n^O| - alpha rho n) / sqrt(d_n / 2)`,
//! * [`StatisticKind::SpeedScaled`]: `(|xi_n^O| - alpha rho n) / sqrt(alpha n)`,
//! * [`StatisticKind::FullLine`]: `(sum_{|x| <= alpha n} xi_n^{2Z}(x) - alpha rho n) / sqrt(alpha n)`.
//!
//! The first two only use trials that survived to the horizon. The plug-in
//! constants are fixed per experiment and should come from an independent run.

use std::fmt;
use std::io::{self, Write};

use serde::Serialize;

use crate::error::{argument, Error, Result};
use crate::processes::{observe_trial, summation_half_width, LevelObservation};
use crate::stats::{ks_normal, ks_two_sample, mean, normal_cdf, variance, Ecdf};

/// Smallest batch [`ks_distance`] accepts.
pub const MIN_KS_BATCH: usize = 100;

pub const SUMMARY_CSV_HEADER: &str = "level,kind,count,mean,variance,ks_distance";
pub const PLOT_CSV_HEADER: &str = "x,ecdf,normal_cdf";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    DiameterScaled,
    SpeedScaled,
    FullLine,
    /// `S_{N_t} / sqrt(N_t)`.
    RandomIndexSelf,
    /// `S_{N_t} / sqrt(theta t)`.
    RandomIndexDeterministic,
}

impl StatisticKind {
    pub fn label(&self) -> &'static str {
        match self {
            StatisticKind::DiameterScaled => "diameter_scaled",
            StatisticKind::SpeedScaled => "speed_scaled",
            StatisticKind::FullLine => "full_line",
            StatisticKind::RandomIndexSelf => "random_index_self",
            StatisticKind::RandomIndexDeterministic => "random_index_deterministic",
        }
    }
}

impl fmt::Display for StatisticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Conditioning {
    SurvivedToHorizon,
    Unconditioned,
}

/// Constants used to center and scale every level of one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlugIn {
    pub alpha: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleBatch {
    pub kind: StatisticKind,
    pub level: u64,
    pub conditioning: Conditioning,
    pub values: Vec<f64>,
    /// Surviving trials dropped because `d_n = 0`.
    pub excluded: usize,
}

impl SampleBatch {
    pub fn mean(&self) -> f64 {
        mean(&self.values)
    }

    pub fn variance(&self) -> f64 {
        variance(&self.values)
    }
}

/// Standardizes the observations of one level.
pub fn build_batch(kind: StatisticKind, observations: &[LevelObservation], plug: PlugIn) -> Result<SampleBatch> {
    let Some(first) = observations.first() else {
        return Err(Error::InsufficientData("no observations".into()));
    };
    let level = first.level;
    if observations.iter().any(|o| o.level != level) {
        return Err(argument("observations span several levels"));
    }
    if !(plug.alpha > 0.0) || !(0.0..=1.0).contains(&plug.rho) {
        return Err(argument(format!("invalid plug-in constants {plug:?}")));
    }
    let n = level as f64;
    let center = plug.alpha * plug.rho * n;
    let speed_scale = (plug.alpha * n).sqrt();
    let mut excluded = 0;
    let mut values = Vec::with_capacity(observations.len());
    let conditioning = match kind {
        StatisticKind::DiameterScaled => {
            for o in observations.iter().filter(|o| o.survived) {
                match o.diameter {
                    Some(d) if d > 0 => values.push((o.size as f64 - center) / (d as f64 / 2.0).sqrt()),
                    _ => excluded += 1,
                }
            }
            Conditioning::SurvivedToHorizon
        }
        StatisticKind::SpeedScaled => {
            values.extend(
                observations
                    .iter()
                    .filter(|o| o.survived)
                    .map(|o| (o.size as f64 - center) / speed_scale),
            );
            Conditioning::SurvivedToHorizon
        }
        StatisticKind::FullLine => {
            let a = summation_half_width(plug.alpha, level);
            for o in observations {
                match o.window {
                    Some((width, count)) if width == a => {
                        values.push((count as f64 - center) / speed_scale)
                    }
                    Some((width, _)) => {
                        return Err(argument(format!(
                            "observation summed over [-{width}, {width}] but the plug-in speed gives [-{a}, {a}]"
                        )))
                    }
                    None => return Err(argument("observations carry no full-line window count")),
                }
            }
            Conditioning::Unconditioned
        }
        StatisticKind::RandomIndexSelf | StatisticKind::RandomIndexDeterministic => {
            return Err(argument("random-index batches are built by the association harness"))
        }
    };
    Ok(SampleBatch {
        kind,
        level: level as u64,
        conditioning,
        values,
        excluded,
    })
}

/// `sup_x |ECDF(x) - Phi(x / sqrt(s2))|`.
pub fn ks_distance(batch: &SampleBatch, s2: f64) -> Result<f64> {
    if batch.values.len() < MIN_KS_BATCH {
        return Err(Error::InsufficientData(format!(
            "batch has {} values, need {MIN_KS_BATCH}",
            batch.values.len()
        )));
    }
    if !(s2 > 0.0) {
        return Err(argument(format!("target variance must be positive, got {s2}")));
    }
    ks_normal(&batch.values, 0.0, s2)
}

/// `(x, ECDF(x), Phi(x))` at every distinct value of the batch.
pub fn plot_data(batch: &SampleBatch, s2: f64) -> Result<Vec<(f64, f64, f64)>> {
    if !(s2 > 0.0) {
        return Err(argument(format!("target variance must be positive, got {s2}")));
    }
    Ok(Ecdf::new(&batch.values)?
        .steps()
        .into_iter()
        .map(|(x, f)| (x, f, normal_cdf(x, 0.0, s2)))
        .collect())
}

pub fn write_plot_csv<W: Write>(batch: &SampleBatch, s2: f64, out: &mut W) -> Result<()> {
    let rows = plot_data(batch, s2)?;
    let io = |e: io::Error| argument(format!("write failed: {e}"));
    writeln!(out, "{PLOT_CSV_HEADER}").map_err(io)?;
    for (x, f, g) in rows {
        writeln!(out, "{x},{f},{g}").map_err(io)?;
    }
    Ok(())
}

/// One row of the per-level summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchSummary {
    pub level: u64,
    pub kind: StatisticKind,
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    /// `None` when the batch is too small to compare.
    pub ks_distance: Option<f64>,
}

pub fn summarize(batch: &SampleBatch, s2: f64) -> Result<BatchSummary> {
    let ks_distance = match ks_distance(batch, s2) {
        Ok(d) => Some(d),
        Err(Error::InsufficientData(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(BatchSummary {
        level: batch.level,
        kind: batch.kind,
        count: batch.values.len(),
        mean: batch.mean(),
        variance: batch.variance(),
        ks_distance,
    })
}

impl BatchSummary {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.level,
            self.kind,
            self.count,
            self.mean,
            self.variance,
            self.ks_distance.map(|d| d.to_string()).unwrap_or_default()
        )
    }
}

/// Both scalings of the origin cluster at one level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub level: u32,
    pub count: usize,
    pub excluded: usize,
    pub ks_diameter_scaled: f64,
    pub ks_speed_scaled: f64,
    pub variance_diameter_scaled: f64,
    pub variance_speed_scaled: f64,
    pub variance_ratio: f64,
    /// Two-sample distance between the two batches.
    pub ks_between: f64,
    /// Mean of `sqrt(d_n / 2) / sqrt(alpha n)` over the batch.
    pub mean_scale_ratio: f64,
}

/// Compares the diameter and speed scalings level by level against
/// `N(0, s2)`; `levels[i]` holds the observations of one level.
pub fn compare_scalings(levels: &[Vec<LevelObservation>], plug: PlugIn, s2: f64) -> Result<Vec<ScalingRow>> {
    if levels.len() < 3 {
        return Err(argument(format!("need at least 3 levels, got {}", levels.len())));
    }
    levels
        .iter()
        .map(|obs| {
            let diam = build_batch(StatisticKind::DiameterScaled, obs, plug)?;
            let speed = build_batch(StatisticKind::SpeedScaled, obs, plug)?;
            let n = diam.level as f64;
            let ratios: Vec<f64> = obs
                .iter()
                .filter(|o| o.survived)
                .filter_map(|o| o.diameter.filter(|&d| d > 0))
                .map(|d| (d as f64 / 2.0 / (plug.alpha * n)).sqrt())
                .collect();
            Ok(ScalingRow {
                level: diam.level as u32,
                count: diam.values.len(),
                excluded: diam.excluded,
                ks_diameter_scaled: ks_distance(&diam, s2)?,
                ks_speed_scaled: ks_distance(&speed, s2)?,
                variance_diameter_scaled: diam.variance(),
                variance_speed_scaled: speed.variance(),
                variance_ratio: diam.variance() / speed.variance(),
                ks_between: ks_two_sample(&diam.values, &speed.values)?,
                mean_scale_ratio: mean(&ratios),
            })
        })
        .collect()
}

/// How many surviving trials to collect and at which levels.
#[derive(Debug, Clone, PartialEq)]
pub struct GatherPlan {
    pub p: f64,
    pub seed: u64,
    /// Sorted observation levels; the last one is the horizon.
    pub levels: Vec<u32>,
    pub survivors: u64,
    /// Speed used for the full-line summation window.
    pub window_alpha: f64,
    pub workers: usize,
}

/// Observations of trials `0..trials_run`, grouped by level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelData {
    pub trials_run: u64,
    pub survivors: u64,
    pub by_level: Vec<Vec<LevelObservation>>,
}

/// Gives up when this many trials per requested survivor have not produced
/// enough survivors.
pub const MAX_TRIALS_PER_SURVIVOR: u64 = 20;

/// Runs trials in index order until `plan.survivors` of them survive to the
/// horizon.
pub fn gather_survivors(plan: &GatherPlan) -> Result<LevelData> {
    let mut levels = plan.levels.clone();
    levels.sort_unstable();
    levels.dedup();
    let Some(&horizon) = levels.last() else {
        return Err(argument("no levels requested"));
    };
    if plan.survivors == 0 {
        return Err(argument("need at least one surviving trial"));
    }
    let cap = plan.survivors.saturating_mul(MAX_TRIALS_PER_SURVIVOR);
    let mut data = LevelData {
        trials_run: 0,
        survivors: 0,
        by_level: vec![Vec::new(); levels.len()],
    };
    let alpha = Some(plan.window_alpha);
    crate::parallel::for_each_indexed(
        0..cap,
        plan.workers,
        256,
        |i| observe_trial(plan.p, horizon, plan.seed, i, &levels, alpha),
        |_, obs| {
            data.trials_run += 1;
            if obs[0].survived {
                data.survivors += 1;
            }
            for (slot, o) in data.by_level.iter_mut().zip(obs) {
                slot.push(o);
            }
            Ok(data.survivors < plan.survivors)
        },
    )?;
    if data.survivors < plan.survivors {
        return Err(Error::Regime(format!(
            "only {} of {} requested survivors in {} trials",
            data.survivors, plan.survivors, data.trials_run
        )));
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(level: u32, size: u64, diameter: Option<u64>, survived: bool) -> LevelObservation {
        LevelObservation {
            trial: 0,
            level,
            size,
            diameter,
            rminus: None,
            lplus: None,
            survived,
            window: None,
        }
    }

    #[test]
    fn deterministic_process() {
        // All bonds open: |xi_n| = n + 1, d_n = 2n, alpha = rho = 1.
        let plug = PlugIn { alpha: 1.0, rho: 1.0 };
        for n in [4u32, 16, 64] {
            let o = observe_trial(1.0, n, 0, 0, &[n], Some(1.0)).unwrap();
            let b = build_batch(StatisticKind::DiameterScaled, &o, plug).unwrap();
            assert!((b.values[0] - 1.0 / (n as f64).sqrt()).abs() < 1e-15);
            let s = build_batch(StatisticKind::SpeedScaled, &o, plug).unwrap();
            assert_eq!(s.values, b.values);
            let f = build_batch(StatisticKind::FullLine, &o, plug).unwrap();
            assert!((f.values[0] - 1.0 / (n as f64).sqrt()).abs() < 1e-15);
            assert_eq!(f.conditioning, Conditioning::Unconditioned);
        }
    }

    #[test]
    fn survivors_only_and_degenerate_diameters() {
        let plug = PlugIn { alpha: 0.5, rho: 0.5 };
        let data = [
            obs(8, 3, Some(4), true),
            obs(8, 1, Some(0), true),
            obs(8, 0, None, false),
            obs(8, 2, Some(2), false),
        ];
        let b = build_batch(StatisticKind::DiameterScaled, &data, plug).unwrap();
        assert_eq!(b.values, vec![(3.0 - 2.0) / 2f64.sqrt()]);
        assert_eq!(b.excluded, 1);
        let s = build_batch(StatisticKind::SpeedScaled, &data, plug).unwrap();
        assert_eq!(s.values, vec![0.5, -0.5]);
        assert!(build_batch(StatisticKind::FullLine, &data, plug).is_err());
    }

    #[test]
    fn window_must_match_plug_in() {
        let o = observe_trial(0.8, 20, 0, 0, &[20], Some(0.5)).unwrap();
        let plug = PlugIn { alpha: 0.7, rho: 0.9 };
        assert!(build_batch(StatisticKind::FullLine, &o, plug).is_err());
        assert!(build_batch(StatisticKind::FullLine, &o, PlugIn { alpha: 0.5, rho: 0.9 }).is_ok());
    }

    #[test]
    fn mixed_levels_rejected() {
        let plug = PlugIn { alpha: 0.5, rho: 0.5 };
        let data = [obs(8, 3, Some(4), true), obs(9, 3, Some(4), true)];
        assert!(build_batch(StatisticKind::SpeedScaled, &data, plug).is_err());
        assert!(build_batch(StatisticKind::SpeedScaled, &[], plug).is_err());
        assert!(build_batch(StatisticKind::SpeedScaled, &data[..1], PlugIn { alpha: 0.0, rho: 0.5 }).is_err());
    }

    fn batch(values: Vec<f64>) -> SampleBatch {
        SampleBatch {
            kind: StatisticKind::SpeedScaled,
            level: 1,
            conditioning: Conditioning::Unconditioned,
            values,
            excluded: 0,
        }
    }

    #[test]
    fn ks_contract() {
        assert_eq!(ks_distance(&batch(vec![0.0; 100]), 1.0).unwrap(), 0.5);
        assert!(matches!(
            ks_distance(&batch(vec![0.0; 99]), 1.0),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(ks_distance(&batch(vec![0.0; 100]), 0.0), Err(Error::Argument(_))));
    }

    #[test]
    fn plot_rows_are_monotone() {
        let b = batch((0..50).map(|i| (i as f64 - 25.0) / 10.0).collect());
        let rows = plot_data(&b, 2.0).unwrap();
        assert_eq!(rows.len(), 50);
        assert!(rows.windows(2).all(|w| w[0].1 <= w[1].1 && w[0].2 <= w[1].2));
        assert_eq!(rows.last().unwrap().1, 1.0);
        let mut buf = Vec::new();
        write_plot_csv(&b, 2.0, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("x,ecdf,normal_cdf\n-2.5,0.02,"));
    }

    #[test]
    fn summary_line() {
        let s = summarize(&batch(vec![1.0, 3.0]), 1.0).unwrap();
        assert_eq!(s.csv_line(), "1,speed_scaled,2,2,2,");
    }

    #[test]
    fn compare_needs_three_levels() {
        let plug = PlugIn { alpha: 1.0, rho: 1.0 };
        assert!(compare_scalings(&[vec![], vec![]], plug, 1.0).is_err());
    }

    #[test]
    fn gather_stops_at_requested_survivors() {
        let plan = GatherPlan {
            p: 0.8,
            seed: 2,
            levels: vec![20, 10],
            survivors: 30,
            window_alpha: 0.5,
            workers: 2,
        };
        let data = gather_survivors(&plan).unwrap();
        assert_eq!(data.survivors, 30);
        assert!(data.by_level[1][data.trials_run as usize - 1].survived);
        assert_eq!(data.by_level[0].len() as u64, data.trials_run);
        assert!(data.by_level[0].iter().all(|o| o.level == 10));
        let dead = GatherPlan { p: 0.0, ..plan };
        assert!(matches!(gather_survivors(&dead), Err(Error::Regime(_))));
    }
}
