//! `psns`: simulation, certification and experiment driver.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use psns_core::Error;

#[derive(Debug, Parser)]
#[command(name = "psns", version, about = "Stochastic monotone-viscosity Navier-Stokes on the 3-torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run document.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "psns-out")]
    out: PathBuf,
    /// Overrides `integration.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for ensembles and sampling.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Continue a `simulate` run from a checkpoint.
    #[arg(long, global = true)]
    resume: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// One trajectory: norm time series and checkpoints.
    Simulate,
    /// Moment estimates over an ensemble.
    Ensemble,
    /// Sampled certification of the structural inequalities.
    Certify,
    /// Coupled pairs and the contraction functional.
    Uniqueness,
    /// Pathwise scaling transform check (pure power law).
    Scaling,
    /// Structure functions and power-law fits.
    Structure,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Ensemble => "ensemble",
            Self::Certify => "certify",
            Self::Uniqueness => "uniqueness",
            Self::Scaling => "scaling",
            Self::Structure => "structure",
        }
    }
}

pub const EXIT_VERDICT: u8 = 2;
pub const EXIT_CONFIG: u8 = 3;
pub const EXIT_RUNTIME: u8 = 4;

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) | Error::NonFinite { .. } | Error::Checkpoint(_) | Error::Json(_) => EXIT_RUNTIME,
        _ => EXIT_CONFIG,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let opts = commands::Options { config: cli.config, out: cli.out, seed: cli.seed, resume: cli.resume };
    let code = commands::run(cli.command, &opts);
    ExitCode::from(code)
}
