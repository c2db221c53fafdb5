//! `modematch` command-line front end.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use modematch::{barrier::BarrierError, modebasis::BasisError, oracle::OracleError, petal::PetalError, scatter::ScatterError};

use config::{Flags, RunConfig};

/// Invalid user input: exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// No root or resonance where the solver looked: exit code 4.
#[derive(Debug)]
pub struct NoRoot(pub String);

impl std::fmt::Display for NoRoot {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NoRoot {}

/// Invariant suite failure: exit code 3.
#[derive(Debug)]
pub struct ValidationFailed(pub usize);

impl std::fmt::Display for ValidationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} invariant check(s) failed", self.0)
    }
}

impl std::error::Error for ValidationFailed {}

#[derive(Debug, Parser)]
#[command(name = "modematch", version, about = "Mode-matching solvers for localized eigenmodes and waveguide resonances")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// First eigenvalue of the slit cylinder (a1, a2, h) with its localization ratio.
    BarrierEigen,
    /// barrier-eigen over a sweep of opening widths h.
    BarrierSweep,
    /// Full-transmission resonance of the double-barrier waveguide (a, h).
    Scatter,
    /// Reflection spectrum over the single-mode band (or a lambda sweep).
    ScatterSweep,
    /// Eigenvalue of the disk-with-petal domain near the sector eigenvalue.
    Petal,
    /// Finite-difference reference eigenvalues for the reference geometry (a1 = 1, a2 = 0.8).
    OracleTable,
    /// Run the invariant suite (all modules, or one of specfun, modebasis, barrier, scatter, petal, oracle).
    Validate { suite: Option<String> },
}

/// Exit code for an error chain.
fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    if err.downcast_ref::<NoRoot>().is_some() {
        return 4;
    }
    if let Some(e) = err.downcast_ref::<BarrierError>() {
        return match e {
            BarrierError::Geometry(_)
            | BarrierError::OutOfRange { .. }
            | BarrierError::Precondition(_)
            | BarrierError::Basis(BasisError::Domain(_)) => 2,
            BarrierError::NoSignChange { .. } => 4,
            _ => 3,
        };
    }
    if let Some(e) = err.downcast_ref::<ScatterError>() {
        return match e {
            ScatterError::Geometry(_) | ScatterError::OutOfBand { .. } | ScatterError::Basis(BasisError::Domain(_)) => 2,
            _ => 3,
        };
    }
    if let Some(e) = err.downcast_ref::<PetalError>() {
        return match e {
            PetalError::Geometry(_) | PetalError::OutOfRange { .. } => 2,
            _ => 3,
        };
    }
    if let Some(OracleError::Config(_)) = err.downcast_ref::<OracleError>() {
        return 2;
    }
    3
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("MODEMATCH_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| ConfigError(format!("MODEMATCH_THREADS must be a positive integer (got `{v}`)")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    init_threads()?;
    let cfg = RunConfig::resolve(&cli.flags)?;
    commands::run(&cli.command, &cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit_code(&e);
            eprintln!("modematch: {e:#}");
            ExitCode::from(code)
        }
    }
}
