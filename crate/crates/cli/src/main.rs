//! `abraham`: command-line front end for the rigid-charge simulations.

mod commands;
mod config;
mod error;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "abraham", version, about = "Rigid charge coupled to the Maxwell field")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Solver {
    Volterra,
    Grid,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Bound {
    Kernel,
    Soliton,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate the soliton fields, equation residuals and decay scans.
    Soliton {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evolve the configured pulse freely on the grid.
    Propagate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the coupled particle–field dynamics.
    Simulate {
        #[arg(long, value_enum)]
        solver: Solver,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the trajectories of two runs.
    Compare {
        run_a: PathBuf,
        run_b: PathBuf,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Long-time diagnostics of a finished run directory.
    Diagnose { run_dir: PathBuf },
    /// Fit decay slopes of the memory kernel or the soliton.
    BoundsCheck {
        #[arg(long, value_enum)]
        what: Bound,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn out_dir(config: &RunConfig, out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| config.output_dir.clone())
}

fn print_json(v: &serde_json::Value) -> Result<(), CliError> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let load = |p: &Path| RunConfig::load(p);
    match cli.command {
        Command::Soliton { config, out } => {
            let c = load(&config)?;
            commands::soliton(&c, &out_dir(&c, out))
        }
        Command::Propagate { config, out } => {
            let c = load(&config)?;
            commands::propagate(&c, &out_dir(&c, out))
        }
        Command::Simulate { solver, config, out } => {
            let c = load(&config)?;
            if matches!(solver, Solver::Grid) {
                c.check_grid_horizon()?;
            }
            let name = match solver {
                Solver::Volterra => "volterra",
                Solver::Grid => "grid",
            };
            commands::simulate(&c, name, &out_dir(&c, out))
        }
        Command::Compare { run_a, run_b, out } => print_json(&commands::compare(&run_a, &run_b, out.as_deref())?),
        Command::Diagnose { run_dir } => print_json(&commands::diagnose(&run_dir)?),
        Command::BoundsCheck { what, config, out } => {
            let c = load(&config)?;
            let what = match what {
                Bound::Kernel => "kernel",
                Bound::Soliton => "soliton",
            };
            print_json(&commands::bounds_check(&c, what, &out_dir(&c, out))?)
        }
    }
}

fn main() -> ExitCode {
    if let Ok(s) = std::env::var("ABRAHAM_THREADS") {
        match s.parse::<usize>() {
            Ok(n) if n > 0 => {
                abraham_core::exec::init_threads(n);
            }
            _ => {
                eprintln!("error: ABRAHAM_THREADS must be a positive integer, got `{s}`");
                return ExitCode::from(2);
            }
        }
    }
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
