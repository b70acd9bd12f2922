//! Command-line orchestration for SQG experiments: configuration, seeding,
//! NDJSON output sinks and run manifests.

pub mod commands;
pub mod compare;
pub mod config;
pub mod manifest;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use config::{parse_config, parse_config_str, RunConfig};
pub use manifest::RunManifest;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] sqg_core::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("outputs differ: {0}")]
    Mismatch(String),
}

impl CliError {
    /// 2 for a numerical blow-up, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(sqg_core::Error::BlowUp { .. }) => 2,
            _ => 1,
        }
    }
}

impl From<sqg_core::solver::Interrupted<f64>> for CliError {
    fn from(e: sqg_core::solver::Interrupted<f64>) -> Self {
        CliError::Core(e.into())
    }
}

#[derive(Debug, Parser)]
#[command(name = "sqg", version, about = "Forced critical SQG solver and diagnostics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one trajectory and write samples, band energies, flux and checkpoints.
    Simulate(RunArgs),
    /// Flux report for Q = -1..Q_max on a checkpoint.
    DiagFlux {
        #[command(flatten)]
        run: RunArgs,
        /// Overrides experiment.flux.checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// De Giorgi level energies, iteration fit and L^inf constants.
    DiagDegiorgi(RunArgs),
    /// Absorbing-ball entry times for a seeded ensemble.
    Absorb(RunArgs),
    /// Pairwise tracking distances along a t* ladder.
    Track(RunArgs),
    /// Weak-distance sup along a decreasing viscosity sequence.
    ViscLimit(RunArgs),
    /// Compare two output files or directories.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Relative tolerance for NDJSON numbers.
        #[arg(long, default_value_t = 1e-13)]
        rel: f64,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML configuration file.
    pub config: PathBuf,
    /// Output root; overrides SQG_OUT_DIR and output.dir.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads for ensemble members (default: all cores).
    #[arg(long, short = 'j')]
    pub jobs: Option<usize>,
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run_command<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(manifest) => {
            if let Some(m) = manifest {
                for out in &m.outputs {
                    println!("{}", out.display());
                }
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
