//! `kappa`: batch front end for the kappa-core toolkit.

mod commands;
mod error;
mod output;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Which;
use crate::error::CliError;
use crate::output::{Format, Writer};
use crate::spec::Overrides;

#[derive(Debug, Parser)]
#[command(name = "kappa", version, about = "Symbol checks, dyadic tables, spectral solves and estimate verification")]
struct Cli {
    /// Problem specification (JSON).
    #[arg(long, global = true)]
    spec: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Sphere or quadrature resolution (check-symbol, decompose) or points
    /// per axis (solve, verify).
    #[arg(long, global = true)]
    resolution_override: Option<usize>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Homogeneity and ellipticity bounds of the principal symbol.
    CheckSymbol,
    /// Per-shell Mihlin table of a solution multiplier.
    Decompose {
        /// Derivative multi-index, comma separated; repeatable.
        #[arg(long = "gamma")]
        gammas: Vec<String>,
    },
    /// Spectral solve written in the binary grid format.
    Solve,
    /// Estimate verification reports.
    Verify {
        #[arg(long, value_enum)]
        which: Which,
    },
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let path = cli
        .spec
        .as_ref()
        .ok_or_else(|| CliError::Input("--spec PATH is required".into()))?;
    let mut spec = spec::load(path)?;
    let symbolic = matches!(cli.command, Command::CheckSymbol | Command::Decompose { .. });
    let overrides = Overrides {
        seed: cli.seed,
        resolution: cli.resolution_override.filter(|_| symbolic),
        grid_size: cli.resolution_override.filter(|_| !symbolic),
    };
    spec.resolve(overrides)?;
    let out = Writer::new(&cli.out, cli.format, &spec)?;
    match &cli.command {
        Command::CheckSymbol => commands::check_symbol(&spec, &out).map(drop),
        Command::Decompose { gammas } => {
            let gammas = gammas.iter().map(|g| commands::parse_gamma(g)).collect::<Result<Vec<_>, _>>()?;
            commands::decompose(&spec, &gammas, &out).map(drop)
        }
        Command::Solve => commands::solve(&spec, &out).map(drop),
        Command::Verify { which } => commands::verify(&spec, *which, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
