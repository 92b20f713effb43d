//! `smm`: sampling, accounting, calibration, experiments and benchmarks
//! for the Skellam and discrete Gaussian mixture mechanisms.

mod commands;
mod output;
mod params;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use params::Params;

#[derive(Debug, Parser)]
#[command(
    name = "smm",
    version,
    about = "Distributed differential privacy with Skellam and discrete Gaussian mixtures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw from an exact sampler and test the draws against the pmf
    Sample(Params),
    /// Privacy report for a mechanism, or convert one (alpha, tau) pair
    Account(Params),
    /// Smallest noise meeting a target epsilon
    Calibrate(Params),
    /// Distributed sum estimation on synthetic sphere data
    SumEstimate(Params),
    /// Federated logistic regression on synthetic separable data
    FlTrain(Params),
    /// Throughput of exact and fast noise samplers
    Bench(Params),
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
    Infeasible(String),
}

impl From<smm_core::Error> for CliError {
    fn from(e: smm_core::Error) -> Self {
        use smm_core::Error as E;
        match &e {
            E::InvalidArgument(_) => CliError::Usage(e.to_string()),
            E::Infeasible(c) | E::OrderOutOfRange { constraint: c, .. } => {
                CliError::Infeasible(format!("violated constraint: {c}"))
            }
            E::CalibrationFailure(_) => CliError::Infeasible(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let result = match cli.command {
        Command::Sample(p) => p.resolve().and_then(|p| commands::sample(&p)),
        Command::Account(p) => p.resolve().and_then(|p| commands::account(&p)),
        Command::Calibrate(p) => p.resolve().and_then(|p| commands::calibrate(&p)),
        Command::SumEstimate(p) => p.resolve().and_then(|p| commands::sum_estimate(&p)),
        Command::FlTrain(p) => p.resolve().and_then(|p| commands::fl_train(&p)),
        Command::Bench(p) => p.resolve().and_then(|p| commands::bench(&p)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Infeasible(msg)) => {
            eprintln!("error: privacy-infeasible: {msg}");
            ExitCode::from(3)
        }
    }
}
