mod bundle;
mod commands;
mod config;
mod error;
mod format;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{export, ingest, run, share, synth};

/// Calibrate and compare gravity, radiation and retail models of flows
/// leaving a single origin.
///
/// Exit codes: 0 success, 1 output could not be written, 2 invalid input
/// data, 3 calibration failure, 4 usage error.
#[derive(Debug, Parser)]
#[command(name = "odflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate and normalize raw CSV inputs into a dataset bundle.
    Ingest(ingest::IngestArgs),
    /// Cross-validate and rank model specifications.
    Run(run::RunArgs),
    /// Write map and dispersion data for one fitted spec.
    Export(export::ExportArgs),
    /// Print the share of flows going to a subset of territories.
    Share(share::ShareArgs),
    /// Generate a synthetic dataset in the ingest formats.
    Synth(synth::SynthArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Ingest(a) => ingest::run(a),
        Command::Run(a) => run::run(a),
        Command::Export(a) => export::run(a),
        Command::Share(a) => share::run(a),
        Command::Synth(a) => synth::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("odflow: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
