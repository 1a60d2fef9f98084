//! Command-line front end for the force-prediction pipeline: generate
//! synthetic gait corpora, train and evaluate predictors, replay trials
//! through the delay-compensated control loop, and sweep window/horizon
//! settings.
//!
//! Every run writes its artifacts under the directory or file named by
//! `--out` — never implicitly into the working directory — and drops a run
//! manifest next to them recording the exact invocation. Re-running the same
//! command reproduces every artifact byte for byte, except for wall-clock
//! fields (manifest `wall_time_s`, training-log `wall_time_s` column) and
//! commands that measure real time by design (`latency`, `--realtime`,
//! measured compute delay).
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 malformed or
//! incompatible data, 3 numeric failure (divergence, non-finite values).

mod commands;
mod manifest;

use clap::{Parser, Subcommand};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "gaitloop", version, about = "Plantar-force prediction and early-assistance control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic gait corpus with ground-truth labels.
    Generate(commands::GenerateArgs),
    /// Train a force predictor for one subject on its training split.
    Train(commands::TrainArgs),
    /// Evaluate trained models on held-out trials: prediction error plus
    /// closed-loop event timing.
    Eval(commands::EvalArgs),
    /// Replay one trial through the delay-compensated control loop.
    Simulate(commands::SimulateArgs),
    /// Train one model per (window, horizon, subject) grid point and tabulate
    /// held-out error.
    Sweep(commands::SweepArgs),
    /// Measure single-window inference latency across window lengths.
    Latency(commands::LatencyArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version arrive as "errors" that print to stdout;
            // only real usage mistakes are failures.
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Generate(args) => commands::generate(&args),
        Command::Train(args) => commands::train(&args),
        Command::Eval(args) => commands::eval(&args),
        Command::Simulate(args) => commands::simulate(&args),
        Command::Sweep(args) => commands::sweep(&args),
        Command::Latency(args) => commands::latency(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() {
                2
            } else if e.is_numeric_error() {
                3
            } else {
                1
            })
        }
    }
}
