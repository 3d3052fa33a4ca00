//! Batch driver for the outbreak, GDP-loss and bank-contagion pipeline.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub mod commands;
pub mod config;
pub mod output;

pub use config::{ConfigError, ScenarioConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_CALIBRATION: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("{op}: {source}")]
    Numerical {
        op: &'static str,
        #[source]
        source: szr_core::Error,
    },
    #[error("calibration: {0}")]
    Calibration(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("output: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => EXIT_CONFIG,
            CliError::Numerical { .. } | CliError::Output(_) => EXIT_NUMERICAL,
            CliError::Calibration(_) => EXIT_CALIBRATION,
        }
    }

    /// Classifies a core error raised while running `op`.
    pub fn core(op: &'static str, source: szr_core::Error) -> Self {
        match source {
            szr_core::Error::Calibration(msg) => CliError::Calibration(format!("{op}: {msg}")),
            szr_core::Error::InvalidInput(msg) => CliError::Config(ConfigError::Invalid(format!("{op}: {msg}"))),
            source => CliError::Numerical { op, source },
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn csv(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "szr",
    version,
    about = "Zombie outbreak, GDP loss and bank contagion simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one scenario and write its trajectories.
    Simulate(CommonArgs),
    /// Run every policy level of the configured grid.
    Sweep(CommonArgs),
    /// Reproduce the five-row policy summary table.
    Table2(CommonArgs),
    /// Fit the initial zombie count and freeze the bank books.
    Calibrate(CommonArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Scenario file; embedded defaults when omitted.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Simulation horizon in days.
    #[arg(long, value_name = "DAYS")]
    pub horizon: Option<f64>,
    /// Worker threads for sweeps.
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
    /// Treat short-term funding markets as functional.
    #[arg(long)]
    pub repo_liquid: bool,
    /// Calibration file written by `calibrate`.
    #[arg(long, value_name = "PATH")]
    pub calibration: Option<PathBuf>,
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate(&args),
        Command::Sweep(args) => commands::sweep(&args),
        Command::Table2(args) => commands::table2(&args),
        Command::Calibrate(args) => commands::calibrate(&args),
    };
    match result {
        Ok(written) => {
            for path in written {
                println!("wrote {}", path.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
