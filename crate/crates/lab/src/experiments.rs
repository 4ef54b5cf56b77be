use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use perc_core::assoc::{
    anscombe_check, check_association_exhaustive, maximal_inequality_check, occupation_law, random_index_clt,
    AnscombeReport, AssociationReport, Driver, IndexLaw, IndexNoise, JointLaw, MaximalReport, RandomIndexSpec,
    SequenceGenerator,
};
use perc_core::clt::{
    build_batch, compare_scalings, gather_survivors, summarize, write_plot_csv, BatchSummary, GatherPlan, PlugIn,
    ScalingRow, StatisticKind, MIN_KS_BATCH, SUMMARY_CSV_HEADER,
};
use perc_core::enumerate::{size_law, survival_probability};
use perc_core::estimators::{
    draw_nu_samples, estimate_all, estimate_density, estimate_rho_from_lifetimes, estimate_sigma2, EstimateSet,
    EstimationPlan, TailFit, MIN_NU_LEVEL,
};
use perc_core::parallel::for_each_indexed;
use perc_core::processes::{run_trial, TRIAL_CSV_HEADER};
use perc_core::rng::mix64;
use perc_core::stats::{ks_normal, Estimate};

use crate::config::{CommandKind, Event, ExperimentConfig};
use crate::error::{LabError, LabResult};
use crate::output::{num, write_json, Output};

/// Offset mixed into the master seed for the plug-in estimation run of the
/// CLT experiment, so its trials are independent of the CLT batches.
pub const PLUGIN_SEED_OFFSET: u64 = 0x706c_7567_696e;

/// Largest `t` for which the percolation-driven random-index batch is run.
pub const PERCOLATION_T_MAX: f64 = 2000.0;

/// Exponent of the random-index fluctuation.
pub const INDEX_EXPONENT: f64 = 0.75;

const TRIAL_CHUNK: u64 = 512;

/// What a run printed and wrote.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub stdout: Vec<String>,
    pub files: Vec<PathBuf>,
}

impl RunReport {
    fn absorb(&mut self, other: RunReport) {
        self.stdout.extend(other.stdout);
        self.files.extend(other.files);
    }
}

pub fn run(config: &ExperimentConfig) -> LabResult<RunReport> {
    match config.command {
        CommandKind::Simulate => simulate(config, &config.out).map(|s| s.report),
        CommandKind::Enumerate => enumerate(config),
        CommandKind::Estimate => estimate(config, &config.out).map(|(_, r)| r),
        CommandKind::Clt => clt(config, &config.out).map(|c| c.report),
        CommandKind::Assoc => assoc(config, &config.out).map(|a| a.report),
        CommandKind::All => all(config),
    }
}

fn all(config: &ExperimentConfig) -> LabResult<RunReport> {
    let mut report = RunReport::default();
    report.absorb(enumerate_table(config, &config.out.join("enumerate"))?);
    report.absorb(simulate(config, &config.out.join("simulate"))?.report);
    report.absorb(estimate(config, &config.out.join("estimate"))?.1);
    report.absorb(clt(config, &config.out.join("clt"))?.report);
    report.absorb(assoc(config, &config.out.join("assoc"))?.report);
    Ok(report)
}

fn estimate_fields(prefix: &str, e: &Estimate, map: &mut Map<String, Value>) {
    map.insert(prefix.to_string(), num(e.value));
    map.insert(format!("{prefix}_se"), num(e.se));
}

fn tail_fields(prefix: &str, fit: &Option<TailFit>, map: &mut Map<String, Value>) {
    let (c, g, r2, first, last) = match fit {
        Some(f) => (
            num(f.c_hat),
            num(f.gamma_hat),
            num(f.fit.r_squared),
            json!(f.first_level),
            json!(f.last_level),
        ),
        None => (Value::Null, Value::Null, Value::Null, Value::Null, Value::Null),
    };
    map.insert(format!("{prefix}_c"), c);
    map.insert(format!("{prefix}_gamma"), g);
    map.insert(format!("{prefix}_r_squared"), r2);
    map.insert(format!("{prefix}_first_level"), first);
    map.insert(format!("{prefix}_last_level"), last);
}

#[derive(Debug, Clone)]
pub struct SimulateOutcome {
    pub survivors: u64,
    pub rho_hat: Estimate,
    pub report: RunReport,
}

pub fn simulate(config: &ExperimentConfig, dir: &Path) -> LabResult<SimulateOutcome> {
    let mut csv = Output::create(dir, "trials.csv", config)?;
    csv.line(TRIAL_CSV_HEADER)?;
    let mut extinctions = Vec::with_capacity(config.trials as usize);
    let mut diameters = Vec::new();
    let (mut tau_observed, mut tau_provisional, mut tau_max) = (0u64, 0u64, 0u32);
    let mut write_error = None;
    for_each_indexed(
        0..config.trials,
        config.workers,
        TRIAL_CHUNK,
        |i| run_trial(config.p, config.horizon, config.seed, i),
        |_, record| {
            if let Err(e) = record.write_csv(csv.writer(), config.stride) {
                write_error = Some(e);
                return Ok(false);
            }
            extinctions.push(record.extinction_level());
            if record.survived {
                if let Some(d) = record.diameter_path[config.horizon as usize] {
                    diameters.push(d as f64 / (2.0 * config.horizon as f64));
                }
            }
            if let perc_core::processes::Tau::Observed { level, provisional } = record.tau {
                tau_observed += 1;
                tau_provisional += u64::from(provisional);
                tau_max = tau_max.max(level);
            }
            Ok(true)
        },
    )?;
    if let Some(source) = write_error {
        return Err(LabError::Io {
            path: csv.path().display().to_string(),
            source,
        });
    }
    let csv_path = csv.finish()?;
    let rho = estimate_rho_from_lifetimes(extinctions.iter().copied(), config.horizon)?;
    let survivors = *rho.alive.last().expect("alive has horizon + 1 entries");
    let mut map = Map::new();
    map.insert("trials".into(), json!(config.trials));
    map.insert("survivors".into(), json!(survivors));
    estimate_fields("rho_hat", &rho.rho_hat, &mut map);
    match Estimate::mean_of(&diameters) {
        Ok(a) => estimate_fields("alpha_hat", &a, &mut map),
        Err(_) => {
            map.insert("alpha_hat".into(), Value::Null);
            map.insert("alpha_hat_se".into(), Value::Null);
        }
    }
    map.insert("tau_observed".into(), json!(tau_observed));
    map.insert("tau_provisional".into(), json!(tau_provisional));
    map.insert("tau_max".into(), json!(tau_max));
    let summary = write_json(dir, "summary.json", config, map)?;
    Ok(SimulateOutcome {
        survivors,
        rho_hat: rho.rho_hat,
        report: RunReport {
            stdout: vec![format!(
                "{} trials, {} survived to level {}, rho_hat = {:.6} +/- {:.6}",
                config.trials, survivors, config.horizon, rho.rho_hat.value, rho.rho_hat.se
            )],
            files: vec![csv_path, summary],
        },
    })
}

/// Prints the exact probability (`survival`) or the exact law (`size`).
pub fn enumerate(config: &ExperimentConfig) -> LabResult<RunReport> {
    let stdout = match config.event {
        Event::Survival => vec![survival_probability(config.p, config.horizon)?.to_string()],
        Event::Size => {
            let mut lines = vec!["size,probability".to_string()];
            lines.extend(size_law(config.p, config.horizon)?.iter().map(|(k, v)| format!("{k},{v}")));
            lines
        }
    };
    Ok(RunReport {
        stdout,
        files: Vec::new(),
    })
}

/// Exact survival probabilities and size laws for every level the oracle
/// can afford, up to `config.horizon`.
fn enumerate_table(config: &ExperimentConfig, dir: &Path) -> LabResult<RunReport> {
    let mut out = Output::create(dir, "enumerate.csv", config)?;
    out.line("level,event,size,probability")?;
    for level in 1..=config.horizon {
        let survival = match survival_probability(config.p, level) {
            Ok(v) => v,
            Err(perc_core::Error::InfeasibleEnumeration { .. }) => break,
            Err(e) => return Err(e.into()),
        };
        out.line(&format!("{level},survival,,{survival}"))?;
        for (k, v) in size_law(config.p, level)? {
            out.line(&format!("{level},size,{k},{v}"))?;
        }
    }
    Ok(RunReport {
        stdout: Vec::new(),
        files: vec![out.finish()?],
    })
}

pub fn estimation_plan(config: &ExperimentConfig, seed: u64) -> EstimationPlan {
    EstimationPlan {
        p: config.p,
        horizon: config.horizon,
        trials: config.trials,
        seed,
        nu_samples: config.nu_samples,
        nu_half_width: config.nu_width,
        truncation: config.truncation,
        workers: config.workers,
    }
}

pub fn estimate_set_fields(set: &EstimateSet) -> Map<String, Value> {
    let mut map = Map::new();
    map.insert("p".into(), num(set.p));
    map.insert("horizon".into(), json!(set.horizon));
    map.insert("trials".into(), json!(set.trials));
    estimate_fields("rho_hat", &set.rho_hat, &mut map);
    estimate_fields("rho_density", &set.rho_density, &mut map);
    estimate_fields("alpha_hat", &set.alpha_hat, &mut map);
    estimate_fields("alpha_edge", &set.alpha_edge, &mut map);
    estimate_fields("alpha_increment", &set.alpha_increment, &mut map);
    map.insert("sigma2_hat".into(), num(set.sigma2_hat.value));
    map.insert("sigma2_hat_se".into(), num(set.sigma2_hat.se));
    map.insert("sigma2_truncation".into(), json!(set.sigma2_hat.truncation));
    match &set.sigma2_doubled {
        Some(s) => {
            map.insert("sigma2_doubled".into(), num(s.value));
            map.insert("sigma2_doubled_se".into(), num(s.se));
        }
        None => {
            map.insert("sigma2_doubled".into(), Value::Null);
            map.insert("sigma2_doubled_se".into(), Value::Null);
        }
    }
    map.insert("nu_level".into(), json!(set.nu_level));
    map.insert("nu_samples".into(), json!(set.nu_samples));
    map.insert("nu_half_width".into(), json!(set.nu_half_width));
    tail_fields("survival_decay", &set.survival_decay, &mut map);
    tail_fields("tau_decay", &set.tau_decay, &mut map);
    map.insert(
        "covariances".into(),
        Value::Array(set.sigma2_hat.covariances.iter().map(|(_, e)| num(e.value)).collect()),
    );
    map.insert(
        "rho_n_path".into(),
        Value::Array(set.rho_n_path.iter().map(|&v| num(v)).collect()),
    );
    map
}

pub fn estimate(config: &ExperimentConfig, dir: &Path) -> LabResult<(EstimateSet, RunReport)> {
    let set = estimate_all(&estimation_plan(config, config.seed))?;
    let path = write_json(dir, "estimates.json", config, estimate_set_fields(&set))?;
    let line = format!(
        "rho_hat = {:.6}, rho_density = {:.6}, alpha_hat = {:.6}, sigma2_hat = {:.6}",
        set.rho_hat.value, set.rho_density.value, set.alpha_hat.value, set.sigma2_hat.value
    );
    Ok((
        set,
        RunReport {
            stdout: vec![line],
            files: vec![path],
        },
    ))
}

#[derive(Debug, Clone)]
pub struct CltOutcome {
    pub plug: PlugIn,
    pub sigma2: f64,
    pub trials_run: u64,
    pub survivors: u64,
    pub summaries: Vec<BatchSummary>,
    pub scaling: Vec<ScalingRow>,
    pub report: RunReport,
}

impl CltOutcome {
    /// KS distances of one statistic, in level order.
    pub fn ks_path(&self, kind: StatisticKind) -> Vec<(u64, Option<f64>)> {
        self.summaries
            .iter()
            .filter(|s| s.kind == kind)
            .map(|s| (s.level, s.ks_distance))
            .collect()
    }
}

pub const CLT_KINDS: [StatisticKind; 3] = [
    StatisticKind::DiameterScaled,
    StatisticKind::SpeedScaled,
    StatisticKind::FullLine,
];

/// Plug-in constants from an independent run, then `--trials` surviving
/// trials observed at every level of `--levels`.
pub fn clt(config: &ExperimentConfig, dir: &Path) -> LabResult<CltOutcome> {
    let plug_seed = mix64(config.seed ^ PLUGIN_SEED_OFFSET);
    let set = estimate_all(&estimation_plan(config, plug_seed))?;
    let plug = PlugIn {
        alpha: set.alpha_hat.value,
        rho: set.rho_density.value,
    };
    let sigma2 = set.sigma2_hat.value;
    if !(sigma2 > 0.0) {
        return Err(perc_core::Error::Regime(format!("estimated sigma2 = {sigma2} is not positive")).into());
    }
    let mut levels = config.levels.clone();
    levels.sort_unstable();
    levels.dedup();
    let data = gather_survivors(&GatherPlan {
        p: config.p,
        seed: config.seed,
        levels: levels.clone(),
        survivors: config.trials,
        window_alpha: plug.alpha,
        workers: config.workers,
    })?;

    let mut files = Vec::new();
    let mut plug_map = estimate_set_fields(&set);
    plug_map.insert("plugin_seed".into(), json!(plug_seed));
    plug_map.insert("plugin_alpha".into(), num(plug.alpha));
    plug_map.insert("plugin_rho".into(), num(plug.rho));
    plug_map.insert("plugin_sigma2".into(), num(sigma2));
    plug_map.insert("clt_trials_run".into(), json!(data.trials_run));
    plug_map.insert("clt_survivors".into(), json!(data.survivors));
    // Fitted P(alive at the top level but dying later), the error of
    // conditioning on survival to the top level.
    let top = *levels.last().expect("levels validated non-empty") as f64;
    plug_map.insert(
        "survival_proxy_error".into(),
        set.survival_decay
            .as_ref()
            .map_or(Value::Null, |f| num(f.c_hat * (-f.gamma_hat * top).exp())),
    );
    files.push(write_json(dir, "plugins.json", config, plug_map)?);

    let mut summary_csv = Output::create(dir, "clt_summary.csv", config)?;
    summary_csv.line(SUMMARY_CSV_HEADER)?;
    let mut summaries = Vec::new();
    for obs in &data.by_level {
        for kind in CLT_KINDS {
            let batch = build_batch(kind, obs, plug)?;
            let summary = summarize(&batch, sigma2)?;
            summary_csv.line(&summary.csv_line())?;
            if batch.values.len() >= MIN_KS_BATCH {
                let mut plot = Output::create(dir, &format!("plots/{}_n{}.csv", kind.label(), batch.level), config)?;
                write_plot_csv(&batch, sigma2, plot.writer())?;
                files.push(plot.finish()?);
            }
            summaries.push(summary);
        }
    }
    files.push(summary_csv.finish()?);

    let scaling = if data.by_level.len() >= 3 {
        let rows = compare_scalings(&data.by_level, plug, sigma2)?;
        let mut out = Output::create(dir, "scaling.csv", config)?;
        out.line(
            "level,count,excluded,ks_diameter_scaled,ks_speed_scaled,variance_diameter_scaled,\
             variance_speed_scaled,variance_ratio,ks_between,mean_scale_ratio",
        )?;
        for r in &rows {
            out.line(&format!(
                "{},{},{},{},{},{},{},{},{},{}",
                r.level,
                r.count,
                r.excluded,
                r.ks_diameter_scaled,
                r.ks_speed_scaled,
                r.variance_diameter_scaled,
                r.variance_speed_scaled,
                r.variance_ratio,
                r.ks_between,
                r.mean_scale_ratio
            ))?;
        }
        files.push(out.finish()?);
        rows
    } else {
        Vec::new()
    };

    let mut stdout = vec![format!(
        "plug-ins: alpha = {:.6}, rho = {:.6}, sigma2 = {:.6}; {} survivors in {} trials",
        plug.alpha, plug.rho, sigma2, data.survivors, data.trials_run
    )];
    for s in &summaries {
        stdout.push(format!(
            "n = {:>5} {:<16} ks = {}",
            s.level,
            s.kind.label(),
            s.ks_distance.map_or("-".to_string(), |k| format!("{k:.4}"))
        ));
    }
    Ok(CltOutcome {
        plug,
        sigma2,
        trials_run: data.trials_run,
        survivors: data.survivors,
        summaries,
        scaling,
        report: RunReport { stdout, files },
    })
}

#[derive(Debug, Clone)]
pub struct AssocOutcome {
    pub association: Vec<(String, AssociationReport)>,
    pub maximal: Vec<(String, MaximalReport)>,
    pub anscombe: Vec<(String, AnscombeReport)>,
    /// `(generator, t, statistic, ks distance)`.
    pub clt: Vec<(String, f64, StatisticKind, f64)>,
    pub report: RunReport,
}

/// Independent Bernoulli(1/2) triples, occupation laws from the exact
/// oracle, and the anticorrelated pair as a negative control.
pub fn association_laws() -> LabResult<Vec<(String, JointLaw)>> {
    let mut laws = vec![
        ("product_half".to_string(), JointLaw::product(&[0.5, 0.5, 0.5])?),
        ("product_mixed".to_string(), JointLaw::product(&[0.2, 0.6, 0.9])?),
        (
            "anticorrelated_pair".to_string(),
            JointLaw::new(2, vec![0.0, 0.5, 0.5, 0.0])?,
        ),
    ];
    for p in [0.4, 0.6] {
        for (level, sites) in [
            (2u32, vec![-2i64, 0]),
            (2, vec![-2, 0, 2]),
            (3, vec![-1, 1]),
            (3, vec![-3, -1, 3]),
            (4, vec![-2, 0, 2]),
        ] {
            let name = format!(
                "occupation_p{p}_n{level}_{}",
                sites.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("_")
            );
            laws.push((name, occupation_law(p, level, &sites)?));
        }
    }
    Ok(laws)
}

pub fn synthetic_generators() -> Vec<(String, SequenceGenerator)> {
    vec![
        (
            "iid_rademacher".to_string(),
            SequenceGenerator::Independent {
                driver: Driver::Rademacher,
            },
        ),
        (
            "moving_average_gaussian".to_string(),
            SequenceGenerator::default_moving_average(Driver::Gaussian),
        ),
    ]
}

fn percolation_generator(config: &ExperimentConfig) -> LabResult<SequenceGenerator> {
    let level = MIN_NU_LEVEL + MIN_NU_LEVEL % 2;
    let samples = draw_nu_samples(config.p, level, config.nu_width, config.nu_samples, config.seed, config.workers)?;
    let density = estimate_density(&samples)?.value;
    let s2 = estimate_sigma2(&samples, config.truncation)?;
    let autocov = s2.covariances.iter().map(|(_, e)| e.value).collect();
    Ok(SequenceGenerator::percolation(config.p, level, density, autocov)?)
}

pub fn assoc(config: &ExperimentConfig, dir: &Path) -> LabResult<AssocOutcome> {
    let mut association = Vec::new();
    for (name, law) in association_laws()? {
        association.push((name, check_association_exhaustive(&law)));
    }

    let generators = synthetic_generators();
    let mut maximal = Vec::new();
    for (name, g) in &generators {
        for &t in &config.t_grid {
            for &eps in &config.eps {
                match maximal_inequality_check(g, t, eps, config.paths, config.seed, config.workers) {
                    Ok(r) => maximal.push((name.clone(), r)),
                    // m(t) > [t]: the range of the maximum is empty.
                    Err(perc_core::Error::Argument(_)) => continue,
                    Err(e) => return Err(e.into()),
                }
            }
        }
    }

    let ma = &generators[1].1;
    let jitter = RandomIndexSpec::new(
        config.theta,
        IndexLaw::Jitter {
            exponent: INDEX_EXPONENT,
            noise: IndexNoise::Uniform,
        },
    )?;
    let indices = [
        ("jitter_uniform", jitter),
        (
            "drift_sqrt",
            RandomIndexSpec::new(config.theta, IndexLaw::Drift { exponent: 0.5 })?,
        ),
        (
            "doubled_control",
            RandomIndexSpec::new(config.theta, IndexLaw::Scaled { factor: 2.0 * config.theta })?,
        ),
    ];
    let mut anscombe = Vec::new();
    for (name, idx) in &indices {
        for &t in &config.t_grid {
            let r = anscombe_check(ma, idx, t, &config.eps, config.paths, config.seed, config.workers)?;
            anscombe.push((name.to_string(), r));
        }
    }

    let mut clt_rows = Vec::new();
    let percolation = percolation_generator(config)?;
    let mut clt_generators: Vec<(&str, &SequenceGenerator)> = vec![("moving_average_gaussian", ma)];
    clt_generators.push(("percolation", &percolation));
    for (name, g) in clt_generators {
        let s2 = g.sigma2();
        for &t in &config.t_grid {
            if name == "percolation" && t > PERCOLATION_T_MAX {
                continue;
            }
            let (own, det) = random_index_clt(g, &jitter, t, config.paths, config.seed, config.workers)?;
            for batch in [own, det] {
                let ks = ks_normal(&batch.values, 0.0, s2)?;
                clt_rows.push((name.to_string(), t, batch.kind, ks));
            }
        }
    }

    let mut files = Vec::new();
    let mut out = Output::create(dir, "association.csv", config)?;
    out.line("law,min_covariance,pairs_checked")?;
    for (name, r) in &association {
        out.line(&format!("{name},{},{}", r.min_covariance, r.pairs_checked))?;
    }
    files.push(out.finish()?);

    let mut out = Output::create(dir, "maximal.csv", config)?;
    out.line("generator,t,eps,m,lhs,lhs_se,rhs,holds")?;
    for (name, r) in &maximal {
        out.line(&format!(
            "{name},{},{},{},{},{},{},{}",
            r.t,
            r.epsilon,
            r.m,
            r.lhs.value,
            r.lhs.se,
            r.rhs,
            u8::from(r.holds(3.0))
        ))?;
    }
    files.push(out.finish()?);

    let mut out = Output::create(dir, "anscombe.csv", config)?;
    out.line("index,t,eps,exceedance,exceedance_se")?;
    for (name, r) in &anscombe {
        for (eps, e) in &r.exceedance {
            out.line(&format!("{name},{},{eps},{},{}", r.t, e.value, e.se))?;
        }
    }
    files.push(out.finish()?);

    let mut out = Output::create(dir, "random_index_clt.csv", config)?;
    out.line("generator,t,kind,ks_distance")?;
    for (name, t, kind, ks) in &clt_rows {
        out.line(&format!("{name},{t},{kind},{ks}"))?;
    }
    files.push(out.finish()?);

    let violations = maximal.iter().filter(|(_, r)| !r.holds(3.0)).count();
    let stdout = vec![
        format!(
            "association: minimal covariance {:.6} over {} laws (negative control included)",
            association
                .iter()
                .map(|(_, r)| r.min_covariance)
                .fold(f64::INFINITY, f64::min),
            association.len()
        ),
        format!("maximal inequality: {} of {} grid points above the bound", violations, maximal.len()),
    ];
    Ok(AssocOutcome {
        association,
        maximal,
        anscombe,
        clt: clt_rows,
        report: RunReport { stdout, files },
    })
}
