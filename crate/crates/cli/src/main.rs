//! `kalos`: agreement scoring, calibration, diagnostics, noise synthesis and
//! solver validation from the command line.
//!
//! Exit codes: 0 success, 1 invalid input or usage, 2 runtime failure.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{calibrate, diagnose, noise, score, validate};
use output::{Classify, Outcome, EXIT_INVALID};

#[derive(Debug, Parser)]
#[command(name = "kalos", version, about = "Inter-annotator agreement for instance-based vision annotations")]
struct Cli {
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true, env = "KALOS_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate τ* and rank distance metrics by KS separation.
    Calibrate(calibrate::CalibrateArgs),
    /// Score a dataset: mean and global alpha with per-image detail.
    Score(score::ScoreArgs),
    /// Sensitivity, class, vitality, collaboration and distribution analyses.
    Diagnose(diagnose::DiagnoseArgs),
    /// Learn a noise model from a multi-rater dataset.
    FitNoise(noise::FitNoiseArgs),
    /// Synthesize noisy raters from a reference dataset.
    Generate(noise::GenerateArgs),
    /// Sweep noise, rater count, solver and cost against ground truth.
    Validate(validate::ValidateArgs),
    /// Check solver output under shuffled input order.
    Stability(validate::StabilityArgs),
}

fn dispatch(cli: Cli) -> Outcome<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(output::invalid("--jobs must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().runtime()?;
    }
    match cli.command {
        Command::Calibrate(a) => calibrate::run(a),
        Command::Score(a) => score::run(a),
        Command::Diagnose(a) => diagnose::run(a),
        Command::FitNoise(a) => noise::fit(a),
        Command::Generate(a) => noise::generate_cmd(a),
        Command::Validate(a) => validate::validate(a),
        Command::Stability(a) => validate::stability(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INVALID) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
