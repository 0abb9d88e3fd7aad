//! Command-line surface for the adjustment experiments. Every command is a
//! pure function of its config file, flag overrides, and input files; reruns
//! produce byte-identical outputs. Exit codes: 0 success, 2 config/usage
//! error, 3 data-format error, 4 numeric-contract error.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use etf_longtail::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "etf-longtail",
    about = "Post-hoc long-tailed adjustment experiments on ETF classifier geometry",
    version
)]
struct Cli {
    /// JSON run configuration; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed override (simulate and scenario-backed sweeps).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (default: current directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Report format for evaluate/bounds output.
    #[arg(long, global = true, value_parser = ["json", "csv"], default_value = "json")]
    format: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic long-tailed feature files plus a stats file.
    Simulate,
    /// Score an adjustment method on a test feature file.
    Evaluate,
    /// Emit boundary-angle difference heatmaps (radians) as CSV matrices.
    Heatmap,
    /// Sweep the adjustment strength over a gamma grid.
    Sweep,
    /// Angular bound probabilities, validity windows, optimal-angle
    /// matrices, and the ReLU complexity constants.
    Bounds,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let result = match cli.command {
        Command::Simulate => commands::simulate(&cli.config, cli.seed, &out_dir),
        Command::Evaluate => commands::evaluate(&cli.config, cli.seed, &out_dir, &cli.format),
        Command::Heatmap => commands::heatmap(&cli.config, &out_dir),
        Command::Sweep => commands::sweep(&cli.config, cli.seed, &out_dir),
        Command::Bounds => commands::bounds(&cli.config, &out_dir, &cli.format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Format { .. } | Error::Io(_) => 3,
        Error::Contract(_) | Error::Window { .. } => 4,
    }
}
