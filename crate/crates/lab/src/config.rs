use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{LabError, LabResult};

/// Environment variable that overrides `--workers`.
pub const WORKERS_ENV: &str = "PERC_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "perc-lab", version, about = "Monte Carlo and exact experiments on supercritical oriented bond percolation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum CommandKind {
    Simulate,
    Enumerate,
    Estimate,
    Clt,
    Assoc,
    All,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run trials and write one CSV line per (trial, level).
    Simulate(RunArgs),
    /// Exact probabilities by enumerating every bond configuration.
    Enumerate(RunArgs),
    /// Estimate survival, edge speed, covariance sum and tail rates.
    Estimate(RunArgs),
    /// Standardized cluster-size statistics against the normal target.
    Clt(RunArgs),
    /// Association, maximal inequality and random-index checks.
    Assoc(RunArgs),
    /// Every experiment, each in its own output directory.
    All(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Event {
    /// Origin cluster reaches level n.
    Survival,
    /// Law of the number of wet sites at level n.
    Size,
}

impl Event {
    pub fn label(&self) -> &'static str {
        match self {
            Event::Survival => "survival",
            Event::Size => "size",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Bond retention probability.
    #[arg(long, default_value_t = 0.8)]
    pub p: f64,
    /// Horizon N (enumerate: number of levels).
    #[arg(long = "n", default_value_t = 400)]
    pub horizon: u32,
    /// Trials (clt: surviving trials per batch).
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Observation levels for the CLT batches.
    #[arg(long, value_delimiter = ',', default_value = "200,400,800")]
    pub levels: Vec<u32>,
    /// Epsilon grid for the maximal inequality and Anscombe checks.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.3,0.5,1,2,3")]
    pub eps: Vec<f64>,
    /// Covariance truncation L.
    #[arg(long, default_value_t = 50)]
    pub truncation: i64,
    /// Limit of N_t / t for the random index.
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    /// Values of t for the association checks.
    #[arg(long = "t", value_delimiter = ',', default_value = "1000,10000")]
    pub t_grid: Vec<f64>,
    /// Sample paths per association check.
    #[arg(long, default_value_t = 2000)]
    pub paths: u64,
    /// Full-line samples for the covariance sum.
    #[arg(long, default_value_t = 2000)]
    pub nu_samples: u64,
    /// Half-width of the full-line sample window.
    #[arg(long, default_value_t = 400)]
    pub nu_width: i64,
    /// Write every k-th level to the trial CSV.
    #[arg(long, default_value_t = 1)]
    pub stride: u32,
    #[arg(long, value_enum, default_value_t = Event::Survival)]
    pub event: Event,
    #[arg(long, default_value = "perc-out")]
    pub out: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub workers: Option<usize>,
}

/// Everything an experiment needs, validated.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: CommandKind,
    pub p: f64,
    pub horizon: u32,
    pub trials: u64,
    pub seed: u64,
    pub levels: Vec<u32>,
    pub eps: Vec<f64>,
    pub truncation: i64,
    pub theta: f64,
    pub t_grid: Vec<f64>,
    pub paths: u64,
    pub nu_samples: u64,
    pub nu_width: i64,
    pub stride: u32,
    pub event: Event,
    pub out: PathBuf,
    pub workers: usize,
}

impl Command {
    pub fn into_parts(self) -> (CommandKind, RunArgs) {
        match self {
            Command::Simulate(a) => (CommandKind::Simulate, a),
            Command::Enumerate(a) => (CommandKind::Enumerate, a),
            Command::Estimate(a) => (CommandKind::Estimate, a),
            Command::Clt(a) => (CommandKind::Clt, a),
            Command::Assoc(a) => (CommandKind::Assoc, a),
            Command::All(a) => (CommandKind::All, a),
        }
    }
}

impl CommandKind {
    pub fn label(&self) -> &'static str {
        match self {
            CommandKind::Simulate => "simulate",
            CommandKind::Enumerate => "enumerate",
            CommandKind::Estimate => "estimate",
            CommandKind::Clt => "clt",
            CommandKind::Assoc => "assoc",
            CommandKind::All => "all",
        }
    }
}

fn resolve_workers(flag: Option<usize>, env: Option<String>) -> LabResult<usize> {
    if let Some(raw) = env {
        return match raw.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(LabError::Config(format!("{WORKERS_ENV} must be a positive integer, got {raw:?}"))),
        };
    }
    match flag {
        Some(0) => Err(LabError::Config("--workers must be at least 1".into())),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

impl ExperimentConfig {
    pub fn from_args(command: CommandKind, args: RunArgs) -> LabResult<Self> {
        Self::from_args_with_env(command, args, std::env::var(WORKERS_ENV).ok())
    }

    pub fn from_args_with_env(command: CommandKind, args: RunArgs, workers_env: Option<String>) -> LabResult<Self> {
        let config = ExperimentConfig {
            command,
            p: args.p,
            horizon: args.horizon,
            trials: args.trials,
            seed: args.seed,
            levels: args.levels,
            eps: args.eps,
            truncation: args.truncation,
            theta: args.theta,
            t_grid: args.t_grid,
            paths: args.paths,
            nu_samples: args.nu_samples,
            nu_width: args.nu_width,
            stride: args.stride,
            event: args.event,
            out: args.out,
            workers: resolve_workers(args.workers, workers_env)?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> LabResult<()> {
        let fail = |msg: String| Err(LabError::Config(msg));
        if !(0.0..=1.0).contains(&self.p) {
            return fail(format!("p must lie in [0, 1], got {}", self.p));
        }
        if self.horizon < 1 {
            return fail("n must be at least 1".into());
        }
        if self.trials < 1 {
            return fail("trials must be at least 1".into());
        }
        if self.levels.is_empty() || self.levels.contains(&0) {
            return fail("levels must be a non-empty list of positive integers".into());
        }
        if self.eps.is_empty() || self.eps.iter().any(|e| !(*e > 0.0)) {
            return fail("eps must be a non-empty list of positive numbers".into());
        }
        if self.truncation < 0 || self.truncation % 2 != 0 {
            return fail("truncation must be even and non-negative".into());
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return fail("theta must be positive".into());
        }
        if self.t_grid.is_empty() || self.t_grid.iter().any(|t| !(*t >= 1.0)) {
            return fail("t must be a non-empty list of numbers >= 1".into());
        }
        if self.paths < 1 || self.nu_samples < 1 || self.stride < 1 {
            return fail("paths, nu-samples and stride must be at least 1".into());
        }
        if self.nu_width < self.truncation || self.nu_width % 2 != 0 {
            return fail("nu-width must be even and at least the truncation".into());
        }
        Ok(())
    }

    /// `key = value` lines describing the run. Worker count and output paths
    /// are left out so that outputs do not depend on them.
    pub fn echo(&self) -> Vec<(&'static str, String)> {
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        vec![
            ("command", self.command.label().to_string()),
            ("p", self.p.to_string()),
            ("n", self.horizon.to_string()),
            ("trials", self.trials.to_string()),
            ("seed", self.seed.to_string()),
            ("levels", self.levels.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(",")),
            ("eps", list(&self.eps)),
            ("truncation", self.truncation.to_string()),
            ("theta", self.theta.to_string()),
            ("t", list(&self.t_grid)),
            ("paths", self.paths.to_string()),
            ("nu_samples", self.nu_samples.to_string()),
            ("nu_width", self.nu_width.to_string()),
            ("stride", self.stride.to_string()),
            ("event", self.event.label().to_string()),
        ]
    }
}
