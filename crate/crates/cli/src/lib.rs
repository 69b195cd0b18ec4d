//! Batch front end: reads one TOML config, runs a task and writes JSON/CSV
//! reports.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails or the
//! computation errors out, 2 for configuration and usage errors.

pub mod config;
pub mod output;
pub mod tasks;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use config::{ConfigError, ExperimentConfig, Task};
use output::OutDir;
pub use tasks::Outcome;

pub const OUT_ENV: &str = "ENTRODECAY_OUT";
const DEFAULT_OUT: &str = "entrodecay-out";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Library(#[from] entrodecay::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "entrodecay", version, about = "Entropy decay constants for birth–death generators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Admissibility, Bochner identities, the bivariate inequality and detailed balance.
    Verify(RunArgs),
    /// Theoretical bound, spectral gap and searched constants.
    Report(RunArgs),
    /// Entropy decay curves with envelope checks.
    Decay(RunArgs),
    /// Trajectories and histograms.
    Simulate(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML config file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory [default: config `out`, else ./entrodecay-out].
    #[arg(long, env = OUT_ENV)]
    pub out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

impl Command {
    pub fn task(&self) -> (Task, &RunArgs) {
        match self {
            Command::Verify(a) => (Task::Verify, a),
            Command::Report(a) => (Task::Report, a),
            Command::Decay(a) => (Task::Decay, a),
            Command::Simulate(a) => (Task::Simulate, a),
        }
    }
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let (task, args) = cli.command.task();
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(ConfigError::new("--threads", "must be at least 1").into());
        }
        // fails only if a pool already exists, which is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let config = ExperimentConfig::from_path(&args.config)?.resolve(task, args.seed)?;
    let dir = args
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let out = OutDir::create(&dir)?;
    log::info!("{} on {} → {}", task.as_str(), config.model.family(), dir.display());
    tasks::run(&config, &out)
}
