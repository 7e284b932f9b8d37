//! `tabgraph`: latent-graph classification of tabular data from the command
//! line.
//!
//! Exit codes: 0 success, 1 runtime error, 2 usage error.

mod commands;
mod output;
mod settings;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Bad flags, config keys or parameter values.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(
    name = "tabgraph",
    version,
    about = "Graph convolutional networks over latent similarity graphs of tabular data"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Write a synthetic Gaussian-blob dataset.
    Synth(commands::SynthArgs),
    /// Stratified cross-validation; writes JSON and CSV reports.
    Run(commands::RunArgs),
    /// Train every candidate threshold in every fold; writes a CSV.
    Sweep(commands::SweepArgs),
    /// Statistics of the full-dataset graph at one threshold.
    Stats(commands::StatsArgs),
    /// Average ranks, critical distance and Bayesian pairwise comparisons.
    Compare(commands::CompareArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Cmd::Synth(a) => commands::synth(a),
        Cmd::Run(a) => commands::run(a),
        Cmd::Sweep(a) => commands::sweep(a),
        Cmd::Stats(a) => commands::stats(a),
        Cmd::Compare(a) => commands::compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let usage = e.downcast_ref::<UsageError>().is_some();
            let msg = e.chain().map(ToString::to_string).collect::<Vec<_>>().join(": ");
            eprintln!("error: {}", msg.replace('\n', " "));
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
