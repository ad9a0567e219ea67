mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{CliError, Context};

#[derive(Parser)]
#[command(
    name = "spade",
    version,
    about = "Mode-sorting superresolution: probabilities, bounds, simulation and calibration"
)]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override a configuration key; may be repeated. Wins over the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,

    /// Output directory (default: $SPADE_OUT_DIR, else the current directory).
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact and sub-Rayleigh detection probabilities, with and without crosstalk.
    Probs,
    /// Direct-imaging Fisher information over a separation grid.
    FisherScan,
    /// Rescaled SPADE and direct-imaging errors over a separation or intensity grid.
    BoundsScan,
    /// Seeded photon-counting acquisition.
    Simulate,
    /// Fit a calibration curve to a sweep-data CSV.
    Calibrate,
    /// Curves of a theory figure.
    Figure {
        /// fig1, fig2 or fig3
        name: String,
    },
    /// Simulated calibration experiment.
    Experiment {
        /// d-sweep or eps-sweep
        kind: String,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let raw = config::RawConfig::load(cli.config.as_deref(), &cli.sets)?;
    let out_dir = cli
        .out_dir
        .or_else(|| std::env::var_os("SPADE_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let ctx = Context { raw, out_dir };
    match cli.command {
        Command::Probs => commands::probs(ctx),
        Command::FisherScan => commands::fisher_scan(ctx),
        Command::BoundsScan => commands::bounds_scan(ctx),
        Command::Simulate => commands::simulate(ctx),
        Command::Calibrate => commands::calibrate(ctx),
        Command::Figure { name } => commands::figure(ctx, &name),
        Command::Experiment { kind } => commands::experiment(ctx, &kind),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
