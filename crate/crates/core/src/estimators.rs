//! Estimators for the constants of the cluster-size CLT: survival
//! probabilities, edge speed, the covariance sum under the upper invariant
//! measure, and exponential tail rates.

use serde::Serialize;

use crate::error::{argument, check_probability, Error, Result};
use crate::lattice::{BondRealization, BondWindow, CoupledEvolution, WetRow};
use crate::parallel::try_map_indexed;
use crate::processes::{run_trial, LevelObservation, Tau, TrialRecord};
use crate::rng::{domain, mix64};
use crate::stats::{linear_fit, mean, variance, Estimate, LinearFit};

/// Fewest trials a tail point must rest on to enter a fit.
pub const MIN_TAIL_COUNT: u64 = 30;
pub const MIN_TAIL_POINTS: usize = 5;
pub const DEFAULT_TRUNCATION: i64 = 50;
/// Shortest burn-in for samples of the upper invariant measure.
pub const MIN_NU_LEVEL: u32 = 200;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhoEstimate {
    pub trials: u64,
    /// `rho_hat = rho_hat_N`.
    pub rho_hat: Estimate,
    /// Number of trials alive at each level `0..=N`.
    pub alive: Vec<u64>,
    pub rho_n_path: Vec<Estimate>,
}

/// `rho_hat_n` from extinction levels (`None` for trials alive at `horizon`).
pub fn estimate_rho_from_lifetimes(
    extinctions: impl IntoIterator<Item = Option<u32>>,
    horizon: u32,
) -> Result<RhoEstimate> {
    let mut died_at = vec![0u64; horizon as usize + 2];
    let mut trials = 0u64;
    for e in extinctions {
        trials += 1;
        let k = e.map_or(horizon as usize + 1, |k| (k as usize).min(horizon as usize + 1));
        died_at[k] += 1;
    }
    if trials == 0 {
        return Err(argument("cannot estimate survival from zero trials"));
    }
    let mut alive = Vec::with_capacity(horizon as usize + 1);
    let mut count = trials;
    for d in died_at.iter().take(horizon as usize + 1) {
        count -= d;
        alive.push(count);
    }
    let rho_n_path: Vec<Estimate> = alive.iter().map(|&a| Estimate::proportion(a, trials)).collect();
    Ok(RhoEstimate {
        trials,
        rho_hat: rho_n_path[horizon as usize],
        alive,
        rho_n_path,
    })
}

pub fn estimate_rho(records: &[TrialRecord]) -> Result<RhoEstimate> {
    let Some(first) = records.first() else {
        return Err(argument("cannot estimate survival from zero trials"));
    };
    if records.iter().any(|r| r.horizon != first.horizon) {
        return Err(argument("records have different horizons"));
    }
    estimate_rho_from_lifetimes(records.iter().map(TrialRecord::extinction_level), first.horizon)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaEstimate {
    pub level: u32,
    pub survivors: usize,
    /// Mean of `d_N / 2N` over survivors.
    pub diameter: Estimate,
    /// Mean of `r_N^- / N` over the same survivors.
    pub edge: Estimate,
}

impl AlphaEstimate {
    pub fn agree(&self, k: f64) -> bool {
        self.diameter.agrees_with(&self.edge, k)
    }
}

/// Both edge-speed estimators from observations of one level. Only trials
/// that survived are used; on those the two estimators have the same mean by
/// reflection symmetry.
pub fn estimate_alpha_at(observations: &[LevelObservation]) -> Result<AlphaEstimate> {
    let Some(first) = observations.first() else {
        return Err(argument("no observations"));
    };
    let level = first.level;
    if level == 0 || observations.iter().any(|o| o.level != level) {
        return Err(argument("observations must share one positive level"));
    }
    let n = level as f64;
    let mut diam = Vec::new();
    let mut edge = Vec::new();
    for o in observations.iter().filter(|o| o.survived) {
        if let (Some(d), Some(r)) = (o.diameter, o.rminus) {
            diam.push(d as f64 / (2.0 * n));
            edge.push(r as f64 / n);
        }
    }
    if diam.is_empty() {
        return Err(Error::Regime(format!(
            "no trial survived to level {level}; p is probably subcritical"
        )));
    }
    Ok(AlphaEstimate {
        level,
        survivors: diam.len(),
        diameter: Estimate::mean_of(&diam)?,
        edge: Estimate::mean_of(&edge)?,
    })
}

/// Edge speed from full trial records at their common horizon.
pub fn estimate_alpha(records: &[TrialRecord]) -> Result<AlphaEstimate> {
    let Some(first) = records.first() else {
        return Err(argument("no trial records"));
    };
    let obs = records
        .iter()
        .map(|r| LevelObservation::from_record(r, first.horizon))
        .collect::<Result<Vec<_>>>()?;
    estimate_alpha_at(&obs)
}

/// Edge speed from the growth of the mean half-diameter between two levels,
/// `E[(d_hi - d_lo)/2] / (hi - lo)` over trials alive at `hi`. The O(1) offset
/// of the edge cancels, which removes the `1/N` bias of [`estimate_alpha_at`].
pub fn estimate_alpha_increment(lo: &[LevelObservation], hi: &[LevelObservation]) -> Result<Estimate> {
    if lo.len() != hi.len() || lo.is_empty() {
        return Err(argument("need paired, non-empty observations"));
    }
    let (a, b) = (lo[0].level, hi[0].level);
    if a >= b {
        return Err(argument("the second level must be higher"));
    }
    let mut incr = Vec::new();
    for (x, y) in lo.iter().zip(hi) {
        if x.trial != y.trial {
            return Err(argument("observations are not paired by trial"));
        }
        if let (Some(dx), Some(dy)) = (x.diameter, y.diameter) {
            incr.push((dy as f64 - dx as f64) / (2.0 * (b - a) as f64));
        }
    }
    if incr.is_empty() {
        return Err(Error::Regime(format!("no trial survived to level {b}")));
    }
    Estimate::mean_of(&incr)
}

/// Occupation of the full-line process on a window at one level.
#[derive(Debug, Clone, PartialEq)]
pub struct NuSample {
    pub level: u32,
    /// Sites `-half_width, -half_width + 2, ..., half_width`.
    pub half_width: i64,
    pub occupation: Vec<bool>,
}

impl NuSample {
    pub fn site(&self, index: usize) -> i64 {
        -self.half_width + 2 * index as i64
    }

    pub fn at(&self, y: i64) -> bool {
        let i = (y + self.half_width) / 2;
        self.occupation[i as usize]
    }
}

/// Burn-in level for samples of the upper invariant measure: at least
/// [`MIN_NU_LEVEL`] and `10 / gamma`, rounded up to an even level.
pub fn nu_level(gamma_hat: Option<f64>) -> u32 {
    let from_gamma = gamma_hat
        .filter(|g| *g > 0.0)
        .map_or(0.0, |g| (10.0 / g).ceil())
        .min(1e6) as u32;
    let n = MIN_NU_LEVEL.max(from_gamma);
    n + n % 2
}

/// Runs the full-line process to `level` and records it on
/// `[-half_width, half_width]`. The initial line is cut to
/// `half_width + level` on each side, which is exact on the window.
pub fn nu_sample(p: f64, level: u32, half_width: i64, seed: u64, index: u64) -> Result<NuSample> {
    check_probability(p)?;
    if !level.is_multiple_of(2) || half_width % 2 != 0 || half_width < 0 {
        return Err(argument("level and half-width must be even and non-negative"));
    }
    let reach = half_width + level as i64;
    let window = BondWindow::centered(reach, level);
    // Samples use their own stream family, disjoint from trial indices.
    let stream = mix64(domain::NU ^ mix64(index));
    let bonds = BondRealization::derived(p, window, seed, stream)?;
    let mut evo = CoupledEvolution::new(&[WetRow::interval(0, -reach, reach)], &bonds)?;
    for _ in 0..level {
        evo.advance()?;
    }
    let row = &evo.rows()[0];
    let occupation = (0..=half_width).map(|i| row.contains(-half_width + 2 * i)).collect();
    Ok(NuSample {
        level,
        half_width,
        occupation,
    })
}

pub fn draw_nu_samples(
    p: f64,
    level: u32,
    half_width: i64,
    count: u64,
    seed: u64,
    workers: usize,
) -> Result<Vec<NuSample>> {
    try_map_indexed(0..count, workers, |i| nu_sample(p, level, half_width, seed, i))
}

/// Density of the full-line process: by self-duality its one-site marginal
/// at level `n` is `P(Omega_n)`, so on a window this is a low-variance
/// estimate of `rho`.
pub fn estimate_density(samples: &[NuSample]) -> Result<Estimate> {
    if samples.len() < 2 {
        return Err(Error::InsufficientData("need at least two samples".into()));
    }
    let per: Vec<f64> = samples
        .iter()
        .map(|s| s.occupation.iter().filter(|&&b| b).count() as f64 / s.occupation.len() as f64)
        .collect();
    Estimate::mean_of(&per)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sigma2Estimate {
    pub value: f64,
    /// Batch-means standard error.
    pub se: f64,
    pub truncation: i64,
    /// `(x, cov(xi(x), xi(0)))` for `x = 0, 2, ..., L`.
    pub covariances: Vec<(i64, Estimate)>,
}

pub const SIGMA2_BATCHES: usize = 20;

/// Translation-averaged covariances `c(x)`, `x = 0, 2, ..., L`, with
/// reference sites `y` in `[lo, hi]`. Each pair `(y, y + x)` uses the
/// unbiased cross-moment estimator over the samples.
fn covariances(samples: &[NuSample], truncation: i64, lo: i64, hi: i64) -> Vec<f64> {
    let m = samples.len() as f64;
    let s0 = &samples[0];
    let first = (lo + s0.half_width) as usize / 2;
    let last = (hi + s0.half_width) as usize / 2;
    let sites = s0.occupation.len();
    let mut means = vec![0.0; sites];
    for s in samples {
        for (acc, &b) in means.iter_mut().zip(&s.occupation) {
            *acc += f64::from(u8::from(b));
        }
    }
    for v in &mut means {
        *v /= m;
    }
    let lags = (truncation / 2) as usize;
    let mut cross = vec![vec![0u64; last - first + 1]; lags + 1];
    for s in samples {
        let occ = &s.occupation;
        for (j, row) in cross.iter_mut().enumerate() {
            for (k, c) in row.iter_mut().enumerate() {
                let i = first + k;
                *c += u64::from(occ[i] && occ[i + j]);
            }
        }
    }
    cross
        .iter()
        .enumerate()
        .map(|(j, row)| {
            let total: f64 = row
                .iter()
                .enumerate()
                .map(|(k, &c)| {
                    let i = first + k;
                    (c as f64 - m * means[i] * means[i + j]) / (m - 1.0)
                })
                .sum();
            total / row.len() as f64
        })
        .collect()
}

fn sum_lags(c: &[f64]) -> f64 {
    c[0] + 2.0 * c[1..].iter().sum::<f64>()
}

/// `sigma2_hat = sum_{|x| <= L} cov(xi(x), xi(0))` over even `x`, with
/// reference sites in `[lo, hi]`.
pub fn estimate_sigma2_in(samples: &[NuSample], truncation: i64, lo: i64, hi: i64) -> Result<Sigma2Estimate> {
    if samples.len() < 2 * SIGMA2_BATCHES {
        return Err(Error::InsufficientData(format!(
            "need at least {} samples",
            2 * SIGMA2_BATCHES
        )));
    }
    let w = samples[0].half_width;
    if samples.iter().any(|s| s.half_width != w) {
        return Err(argument("samples have different windows"));
    }
    if truncation < 0 || truncation % 2 != 0 {
        return Err(argument("truncation must be even and non-negative"));
    }
    if lo % 2 != 0 || hi % 2 != 0 || lo > hi || lo < -w || hi + truncation > w {
        return Err(argument(format!(
            "truncation {truncation} with reference sites [{lo}, {hi}] exceeds the window [-{w}, {w}]"
        )));
    }
    let c = covariances(samples, truncation, lo, hi);
    let size = samples.len() / SIGMA2_BATCHES;
    let batch: Vec<Vec<f64>> = samples
        .chunks_exact(size)
        .take(SIGMA2_BATCHES)
        .map(|b| covariances(b, truncation, lo, hi))
        .collect();
    let se_of = |values: Vec<f64>| (variance(&values) / values.len() as f64).sqrt();
    let se = se_of(batch.iter().map(|b| sum_lags(b)).collect());
    let covs = c
        .iter()
        .enumerate()
        .map(|(j, &v)| (2 * j as i64, Estimate::new(v, se_of(batch.iter().map(|b| b[j]).collect()))))
        .collect();
    Ok(Sigma2Estimate {
        value: sum_lags(&c),
        se,
        truncation,
        covariances: covs,
    })
}

/// [`estimate_sigma2_in`] with reference sites filling `[-(W - L), W - L]`.
pub fn estimate_sigma2(samples: &[NuSample], truncation: i64) -> Result<Sigma2Estimate> {
    let Some(first) = samples.first() else {
        return Err(Error::InsufficientData("no samples".into()));
    };
    let w = first.half_width;
    if truncation > w {
        return Err(argument(format!("truncation {truncation} exceeds the window half-width {w}")));
    }
    let inner = w - truncation;
    estimate_sigma2_in(samples, truncation, -inner, inner)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailPoint {
    pub level: u32,
    pub probability: f64,
    /// Trials behind `probability`.
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailFit {
    pub c_hat: f64,
    pub gamma_hat: f64,
    pub fit: LinearFit,
    pub first_level: u32,
    pub last_level: u32,
    pub points: usize,
    /// Slope negative and more than two standard errors from zero.
    pub decaying: bool,
}

/// Least-squares fit of `log P = log C - gamma n` over the longest run of
/// consecutive points with positive mass and at least [`MIN_TAIL_COUNT`]
/// trials.
pub fn fit_exponential_tail(tail: &[TailPoint]) -> Result<TailFit> {
    let usable = |t: &TailPoint| t.probability > 0.0 && t.count >= MIN_TAIL_COUNT;
    let mut best = (0, 0);
    let mut start = 0;
    for i in 0..=tail.len() {
        if i == tail.len() || !usable(&tail[i]) {
            if i - start > best.1 - best.0 {
                best = (start, i);
            }
            start = i + 1;
        }
    }
    let run = &tail[best.0..best.1];
    if run.len() < MIN_TAIL_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} usable tail points, need {MIN_TAIL_POINTS}",
            run.len()
        )));
    }
    let xs: Vec<f64> = run.iter().map(|t| t.level as f64).collect();
    let ys: Vec<f64> = run.iter().map(|t| t.probability.ln()).collect();
    let fit = linear_fit(&xs, &ys)?;
    Ok(TailFit {
        c_hat: fit.intercept.exp(),
        gamma_hat: -fit.slope,
        decaying: fit.slope < 0.0 && fit.slope + 2.0 * fit.slope_se < 0.0,
        fit,
        first_level: run[0].level,
        last_level: run[run.len() - 1].level,
        points: run.len(),
    })
}

/// `(n, rho_hat_n - rho_hat)` for `n = 0..=N`, i.e. the empirical
/// `P(Omega_n \ Omega_N)`.
pub fn survival_tail(rho: &RhoEstimate) -> Vec<TailPoint> {
    let last = *rho.alive.last().unwrap_or(&0);
    rho.alive
        .iter()
        .enumerate()
        .map(|(n, &a)| TailPoint {
            level: n as u32,
            probability: (a - last) as f64 / rho.trials as f64,
            count: a - last,
        })
        .collect()
}

/// `(n, P_hat(tau >= n))` for `n = 1..=N`. Level 0 is left out: `tau >= 0`
/// is sure, and surviving trials put an atom at `tau = 0`. Unobserved
/// coupling times count as exceeding every level.
pub fn tau_tail(taus: &[Tau], horizon: u32) -> Vec<TailPoint> {
    let mut at = vec![0u64; horizon as usize + 2];
    for t in taus {
        let k = t.level().map_or(horizon as usize + 1, |l| (l as usize).min(horizon as usize + 1));
        at[k] += 1;
    }
    let total = taus.len() as u64;
    let mut below = 0u64;
    (0..=horizon)
        .map(|n| {
            let count = total - below;
            below += at[n as usize];
            TailPoint {
                level: n,
                probability: count as f64 / total.max(1) as f64,
                count,
            }
        })
        .skip(1)
        .collect()
}

/// Everything estimated for one `p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateSet {
    pub p: f64,
    pub horizon: u32,
    pub trials: u64,
    pub rho_hat: Estimate,
    pub rho_n_path: Vec<f64>,
    /// Full-line density under the burnt-in measure; the plug-in for `rho`.
    pub rho_density: Estimate,
    pub alpha_hat: Estimate,
    pub alpha_edge: Estimate,
    pub alpha_increment: Estimate,
    pub sigma2_hat: Sigma2Estimate,
    /// The same sum with twice the truncation, when the window allows it.
    pub sigma2_doubled: Option<Sigma2Estimate>,
    pub nu_level: u32,
    pub nu_samples: u64,
    pub nu_half_width: i64,
    pub survival_decay: Option<TailFit>,
    pub tau_decay: Option<TailFit>,
}

/// Sample variance of independent values with its standard error.
pub fn variance_estimate(xs: &[f64]) -> Result<Estimate> {
    if xs.len() < 4 {
        return Err(Error::InsufficientData("need at least four values".into()));
    }
    let m = mean(xs);
    let centered: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    let v = variance(xs);
    Ok(Estimate::new(v, (variance(&centered) / xs.len() as f64).sqrt()))
}

/// Settings for [`estimate_all`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationPlan {
    pub p: f64,
    pub horizon: u32,
    pub trials: u64,
    pub seed: u64,
    pub nu_samples: u64,
    pub nu_half_width: i64,
    pub truncation: i64,
    pub workers: usize,
}

struct TrialSummary {
    extinction: Option<u32>,
    tau: Tau,
    half: LevelObservation,
    last: LevelObservation,
}

fn optional_fit(tail: &[TailPoint]) -> Result<Option<TailFit>> {
    match fit_exponential_tail(tail) {
        Ok(f) => Ok(Some(f)),
        Err(Error::InsufficientData(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Runs `trials` trials to `horizon` plus `nu_samples` full-line samples and
/// estimates every constant from them.
pub fn estimate_all(plan: &EstimationPlan) -> Result<EstimateSet> {
    check_probability(plan.p)?;
    if plan.horizon < 2 {
        return Err(argument("horizon must be at least 2"));
    }
    let half_level = plan.horizon / 2;
    let summaries = try_map_indexed(0..plan.trials, plan.workers, |i| {
        let record = run_trial(plan.p, plan.horizon, plan.seed, i)?;
        Ok(TrialSummary {
            extinction: record.extinction_level(),
            tau: record.tau,
            half: LevelObservation::from_record(&record, half_level)?,
            last: LevelObservation::from_record(&record, plan.horizon)?,
        })
    })?;
    let rho = estimate_rho_from_lifetimes(summaries.iter().map(|s| s.extinction), plan.horizon)?;
    let last: Vec<LevelObservation> = summaries.iter().map(|s| s.last).collect();
    let half: Vec<LevelObservation> = summaries.iter().map(|s| s.half).collect();
    let alpha = estimate_alpha_at(&last)?;
    let alpha_increment = estimate_alpha_increment(&half, &last)?;
    let taus: Vec<Tau> = summaries.iter().map(|s| s.tau).collect();
    let survival_decay = optional_fit(&survival_tail(&rho))?;
    let tau_decay = optional_fit(&tau_tail(&taus, plan.horizon))?;

    let level = nu_level(survival_decay.as_ref().map(|f| f.gamma_hat));
    let samples = draw_nu_samples(plan.p, level, plan.nu_half_width, plan.nu_samples, plan.seed, plan.workers)?;
    let sigma2_hat = estimate_sigma2(&samples, plan.truncation)?;
    let sigma2_doubled = if 2 * plan.truncation <= plan.nu_half_width {
        Some(estimate_sigma2(&samples, 2 * plan.truncation)?)
    } else {
        None
    };
    Ok(EstimateSet {
        p: plan.p,
        horizon: plan.horizon,
        trials: plan.trials,
        rho_hat: rho.rho_hat,
        rho_n_path: rho.rho_n_path.iter().map(|e| e.value).collect(),
        rho_density: estimate_density(&samples)?,
        alpha_hat: alpha.diameter,
        alpha_edge: alpha.edge,
        alpha_increment,
        sigma2_hat,
        sigma2_doubled,
        nu_level: level,
        nu_samples: plan.nu_samples,
        nu_half_width: plan.nu_half_width,
        survival_decay,
        tau_decay,
    })
}
