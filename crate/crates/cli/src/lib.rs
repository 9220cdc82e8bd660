//! Command-line front end for the `macex` tool.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Exit code for invalid input (bad flags, malformed files, infeasible laws).
pub const EXIT_VALIDATION: i32 = 2;
/// Exit code when a request exceeds an exhaustive routine's scale guard.
pub const EXIT_SCALE_GUARD: i32 = 3;
/// Default environment variable holding the worker thread count.
pub const DEFAULT_THREADS_ENV: &str = "MACEX_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] macex_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(macex_core::Error::ScaleGuard { .. }) => EXIT_SCALE_GUARD,
            _ => EXIT_VALIDATION,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "macex", version, about = "Expurgated error exponents for two-user multiple-access channels")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Channel JSON file `{x_size, y_size, z_size, rows}`; rows in (x outer, y inner) order.
    #[arg(long, global = true)]
    pub channel: Option<PathBuf>,
    /// Seed for every random choice (codebook generation, Monte Carlo).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Primary output file; a `<out>.manifest.json` is written next to it. Defaults to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Environment variable read for the worker thread count (default: available parallelism).
    #[arg(long, global = true, default_value = DEFAULT_THREADS_ENV)]
    pub threads_env: String,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep a rate grid and write E_X, E_Y, E_XY, E_ex and the baseline exponent as CSV.
    Exponent(commands::ExponentArgs),
    /// Generate a codebook pair and report the packing averages and per-pair maxima as JSON.
    VerifyPacking(commands::PackingArgs),
    /// Expurgate a codebook pair, write the result and audit its realized joint types.
    Expurgate(commands::ExpurgateArgs),
    /// Estimate the average error of a codebook pair under minimum-equivocation decoding.
    Simulate(commands::SimulateArgs),
    /// Search the capacity region for a pentagon containing a rate pair.
    Region(commands::RegionArgs),
}

/// Thread count from the named environment variable, else available parallelism.
pub fn threads_from_env(var: &str) -> Result<usize, CliError> {
    match std::env::var(var) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t >= 1 => Ok(t),
            _ => Err(CliError::Validation(format!("{var} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("macex: {e}");
            e.exit_code()
        }
    }
}
