//! The `qendy` command-line tool: data generation, fitting, simulation,
//! convergence studies and order reduction, writing CSV and JSON artifacts.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;

pub use config::RunConfig;
use config::{Derivatives, Method, Metric, Sampling};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    /// Failure inside a named stage of a command.
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: qendy::Error,
    },
    #[error("write output: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    pub fn stage(stage: &'static str, source: qendy::Error) -> Self {
        CliError::Stage { stage, source }
    }
}

/// Attaches a stage name to core errors.
pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T> StageExt<T> for qendy::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|e| CliError::stage(stage, e))
    }
}

#[derive(Debug, Parser)]
#[command(name = "qendy", version, about = "Identify quadratic embeddings of nonlinear dynamics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a benchmark system and write training.csv (and trajectory.csv).
    Generate(Flags),
    /// Fit a QENDy, SINDy or gEDMD model to a training CSV.
    Fit(Flags),
    /// Simulate a fitted model, optionally against the true system.
    Simulate(Flags),
    /// Monte Carlo convergence of the empirical Gram system.
    Convergence(Flags),
    /// PCA reduction of high-dimensional snapshots followed by a fit and forecast.
    Reduce(Flags),
    /// Tidy coefficient and spectrum tables of a fitted model.
    Report(Flags),
}

/// Flags shared by every subcommand; they override the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON or TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub system: Option<String>,
    /// Built-in dictionary name, `identity`, or a dictionary JSON file.
    #[arg(long)]
    pub dictionary: Option<String>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[arg(long, value_enum)]
    pub sampling: Option<Sampling>,
    #[arg(long, value_enum)]
    pub derivatives: Option<Derivatives>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub force_c_zero: bool,
    /// Sparsity threshold (qendy) or hard threshold (sindy).
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Comma-separated initial state.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    /// Input data CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Input model JSON.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Comma-separated sample sizes for the convergence study.
    #[arg(long, value_delimiter = ',')]
    pub m_list: Option<Vec<usize>>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long, value_enum)]
    pub metric: Option<Metric>,
    /// Number of PCA components.
    #[arg(long)]
    pub k: Option<usize>,
}

impl Flags {
    fn overrides(&self) -> RunConfig {
        RunConfig {
            seed: self.seed,
            out: self.out.clone(),
            system: self.system.clone(),
            dictionary: self.dictionary.clone(),
            method: self.method,
            sampling: self.sampling,
            derivatives: self.derivatives,
            lambda: self.lambda,
            m: self.m,
            dt: self.dt,
            t_end: self.t_end,
            force_c_zero: self.force_c_zero.then_some(true),
            threshold: self.threshold,
            x0: self.x0.clone(),
            data: self.data.clone(),
            model: self.model.clone(),
            m_list: self.m_list.clone(),
            runs: self.runs,
            metric: self.metric,
            k: self.k,
            ..Default::default()
        }
    }

    /// Config file merged with flags, validated.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let base = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let cfg = base.merge(self.overrides());
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Caps the global thread pool at `QENDY_NUM_THREADS` when set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("QENDY_NUM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("QENDY_NUM_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

/// Runs one command, writing the human-readable summary to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Generate(f) => commands::generate(&f.resolve()?, out),
        Command::Fit(f) => commands::fit(&f.resolve()?, out),
        Command::Simulate(f) => commands::simulate(&f.resolve()?, out),
        Command::Convergence(f) => commands::convergence(&f.resolve()?, out),
        Command::Reduce(f) => commands::reduce(&f.resolve()?, out),
        Command::Report(f) => commands::report(&f.resolve()?, out),
    }
}
