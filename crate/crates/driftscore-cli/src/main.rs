//! Command-line driver for the score estimation library.

mod cli;
mod commands;
mod config;
mod csvout;
mod datafile;
mod manifest;
mod pool;

use clap::Parser;

fn main() -> anyhow::Result<()> {
    let args = cli::Cli::parse();
    match &args.command {
        cli::Command::SimulateData(a) => commands::simulate(a),
        cli::Command::EstimateScore(a) => commands::estimate(a),
        cli::Command::VarianceSweep(a) => commands::variance(a),
        cli::Command::MseSweep(a) => commands::mse(a),
        cli::Command::Sgd(a) => commands::sgd(a),
    }
}
