use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fae_cli::commands::{self, EvaluateArgs, IngestArgs, SimulateArgs, SmoothArgs, TrainArgs};

/// Functional autoencoders for curves observed on regular or irregular grids.
#[derive(Debug, Parser)]
#[command(name = "fae", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset from a preset or scenario config.
    Simulate(SimulateArgs),
    /// Validate a long-format CSV dataset, optionally centering it.
    Ingest(IngestArgs),
    /// Train one model on a dataset and serialize it.
    Train(TrainArgs),
    /// Replicated split, fit and score pipeline for one or more models.
    Evaluate(EvaluateArgs),
    /// Evaluate reconstructed curves on a chosen grid.
    Smooth(SmoothArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Ingest(a) => commands::ingest(a),
        Command::Train(a) => commands::train(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Smooth(a) => commands::smooth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
