//! Command-line experiment runner.
//!
//! ```text
//! tamed-sde <converge|stability|simulate|threshold|check|list-models>
//!           [--config <path>] [--seed <u64>] [--paths <n>] [--out <dir>] [--threads <n>]
//! ```
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 for runtime or
//! model-evaluation errors.

mod config;
mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use config::{locate_key, parse_config, ExperimentConfig, ExperimentKind, Stepsizes};
pub use run::{format_float, run_experiment, Overrides};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {message}")]
    Config { message: String },
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "tamed-sde", version, about = "Tamed and semi-tamed SDE scheme experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Experiment config (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Override the config's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Override the number of Monte Carlo paths.
    #[arg(long, global = true)]
    pub paths: Option<usize>,

    /// Override the output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Strong-error study and power-law fit.
    Converge,
    /// Mean-square curves per scheme and stepsize.
    Stability,
    /// Write individual trajectories.
    Simulate,
    /// Stability threshold and decay rates from supplied constants.
    Threshold,
    /// Commutativity and dissipativity checks.
    Check,
    /// Print the built-in model names.
    ListModels,
}

impl Command {
    fn kind(self) -> Option<ExperimentKind> {
        match self {
            Command::Converge => Some(ExperimentKind::Converge),
            Command::Stability => Some(ExperimentKind::Stability),
            Command::Simulate => Some(ExperimentKind::Simulate),
            Command::Threshold => Some(ExperimentKind::Threshold),
            Command::Check => Some(ExperimentKind::Check),
            Command::ListModels => None,
        }
    }
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("tamed-sde: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let Some(kind) = cli.command.kind() else {
        for name in crate::model::BUILTIN_MODELS {
            println!("{name}");
        }
        return Ok(());
    };
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config {
        message: format!("`{}` needs --config <path>", kind.name()),
    })?;
    let source = std::fs::read_to_string(path).map_err(|e| CliError::Config {
        message: format!("{}: {e}", path.display()),
    })?;
    let overrides = Overrides {
        seed: cli.seed,
        paths: cli.paths,
        out: cli.out.clone(),
        threads: cli.threads,
    };
    let written = run_experiment(kind, &source, &path.display().to_string(), &overrides)?;
    for file in written {
        println!("{}", file.display());
    }
    Ok(())
}
