//! Batch front-end: `eig | green | poisson | solve | sweep | verify`.

mod commands;
pub mod config;
mod output;
pub mod verify;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::error::LabError;
pub use commands::{cmd_eig, cmd_green, cmd_poisson, cmd_solve, cmd_sweep, cmd_verify};
pub use config::{Config, Overrides};
pub use verify::{harmonicity_order, verify_suites, Check};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "NLSLAB_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Lab(#[from] LabError),
    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("solver did not converge: {0}")]
    NotConverged(String),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Lab(e) => e.exit_code(),
            CliError::Io { .. } => 2,
            CliError::NotConverged(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "nlslab", version, about = "Green, Poisson and semilinear experiments for subordinate killed stable operators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Eigenpairs, Weyl slope and Hopf rate.
    Eig,
    /// Green matrix profiles and envelope bands.
    Green,
    /// Poisson kernel, reference function and its boundary rate.
    Poisson,
    /// Semilinear problem with the configured nonlinearity.
    Solve,
    /// Existence sweep across the exponent grid.
    Sweep,
    /// Every invariant suite with measured values and tolerances.
    Verify,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub p: Option<f64>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

impl Flags {
    fn overrides(&self) -> Overrides {
        Overrides {
            out: self.out.clone(),
            n: self.n,
            beta: self.beta,
            alpha: self.alpha,
            theta: self.theta,
            p: self.p,
            tol: self.tol,
            seed: self.seed,
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| LabError::Config(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    // A pool may already exist when the front-end runs twice in one process.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn load_config(flags: &Flags) -> Result<Config, CliError> {
    let mut cfg = match &flags.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    cfg.apply(&flags.overrides());
    cfg.validate()?;
    Ok(cfg)
}

pub fn execute(command: Command, cfg: &Config) -> Result<Vec<PathBuf>, CliError> {
    match command {
        Command::Eig => cmd_eig(cfg),
        Command::Green => cmd_green(cfg),
        Command::Poisson => cmd_poisson(cfg),
        Command::Solve => cmd_solve(cfg),
        Command::Sweep => cmd_sweep(cfg),
        Command::Verify => cmd_verify(cfg),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = configure_threads().and_then(|_| load_config(&cli.flags)).and_then(|cfg| execute(cli.command, &cfg));
    match result {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
