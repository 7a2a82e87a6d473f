//! Command-line harness: accelerated solves, synchronization benchmarks,
//! orthogonality studies, and the analytic cost model.
//!
//! Exit codes: 0 success/converged, 2 solver did not converge, 1 usage or
//! runtime error.

mod bench;
mod model;
mod ortho;
mod output;
mod solve;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

pub type CliError = Box<dyn std::error::Error>;

#[derive(Parser)]
#[command(
    name = "anderson",
    version,
    about = "Anderson-accelerated fixed point solvers with exact reduction accounting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a benchmark problem, emitting per-iteration CSV
    Solve(solve::SolveArgs),
    /// Measure window-update reduction counts next to the model's predictions
    Bench(bench::BenchArgs),
    /// Orthogonality-loss sweep over kernels and condition numbers
    Ortho(ortho::OrthoArgs),
    /// Tabulate or plot the synchronization cost model
    Model(model::ModelArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Solve(args) => solve::run(args),
        Command::Bench(args) => bench::run(args),
        Command::Ortho(args) => ortho::run(args),
        Command::Model(args) => model::run(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
