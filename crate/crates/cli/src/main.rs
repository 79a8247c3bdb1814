//! `confnodal` command-line driver.
//!
//! Exit codes: 0 ok, 1 configuration, 2 constraint, 3 numeric, 4 acceptance.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use crate::commands::AcceptanceFailure;
use crate::config::{ConfigError, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "confnodal", version, about = "Forward and inverse nodal problems for conformable diffusion pencils")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Fractional order 0 < alpha <= 1.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Analytic potential preset (zero, classical, cosine, cosine-shifted, roundtrip, mixed).
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Largest eigenvalue index.
    #[arg(long, global = true)]
    nmax: Option<i64>,
    /// Index used by the inverse limits (replaces the round-trip sweep).
    #[arg(long = "n-use", global = true)]
    n_use: Option<i64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Double the grid resolution.
    #[arg(long, global = true)]
    refine: bool,
    /// Limit extrapolation in the inverse steps (`--richardson false` disables).
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    richardson: Option<bool>,
    /// Cross-check the characteristic function against the right-end solution.
    #[arg(long = "cross-check", global = true)]
    cross_check: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues plus eigenfunction samples (spectrum.csv, shots.csv).
    Forward,
    /// Eigenvalues only (spectrum.csv).
    Spectrum,
    /// Eigenvalues and nodal points (spectrum.csv, nodes.json).
    Nodes,
    /// Reconstruct p and q from a nodes file (reconstruction.csv, diagnostics.json).
    Invert {
        /// Nodes in the JSON interchange format (or CSV with columns n,j,x).
        #[arg(long)]
        nodes: PathBuf,
    },
    /// Forward, nodes and inverse against the configured potential (roundtrip_report.json).
    Roundtrip,
    /// Conformable calculus identity residuals (selftest.csv).
    Selftest,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            alpha: self.alpha,
            preset: self.preset.clone(),
            n_max: self.nmax,
            n_use: self.n_use,
            out: self.out.clone(),
            refine: self.refine,
            richardson: self.richardson,
            cross_check: self.cross_check,
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = RunConfig::resolve(cli.common.config.as_deref(), &cli.common.overrides())?;
    match cli.command {
        Command::Forward => commands::forward(&cfg),
        Command::Spectrum => commands::spectrum(&cfg),
        Command::Nodes => commands::nodes(&cfg),
        Command::Invert { nodes } => commands::invert(&cfg, &nodes),
        Command::Roundtrip => commands::roundtrip(&cfg),
        Command::Selftest => commands::selftest(&cfg),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return 1;
        }
        if cause.is::<AcceptanceFailure>() {
            return 4;
        }
        if let Some(e) = cause.downcast_ref::<confnodal::Error>() {
            return if e.is_constraint() { 2 } else { 3 };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // usage errors are configuration errors here, not clap's default 2
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
