//! `gpvol`: generates option datasets, evolves volatility models on them,
//! scores models, and merges run tables — each stage reading the previous
//! stage's directory.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::CliError;

mod commands;
mod config;

#[derive(Parser)]
#[command(
    name = "gpvol",
    version,
    about = "Evolves closed-form implied-volatility models over partitioned option data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic option dataset with its partition manifest.
    Generate(GenerateArgs),
    /// Evolve a model on a dataset under one protocol and method.
    Run(RunArgs),
    /// Score an evolved or reference model against a dataset.
    Evaluate(EvaluateArgs),
    /// Merge the model tables of several run directories into one CSV.
    Report(ReportArgs),
}

#[derive(Args, Default)]
struct ConfigArgs {
    /// Flat key=value config file; later settings override it.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Single `section.key=value` override, repeatable; applied after --config.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output dataset directory (created if missing).
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Number of raw quote records to synthesize.
    #[arg(short = 'n', long)]
    n_records: Option<usize>,
    /// Seed for the synthetic surface.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Dataset directory produced by `gpvol generate`.
    #[arg(long, value_name = "DIR")]
    data: PathBuf,
    /// Output run directory (created if missing).
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Scheduling method: STATIC, RSS, SSS, ASSS or ARSS.
    #[arg(long)]
    method: Option<String>,
    /// Subset family for dynamic methods: ts, mtm or global.
    #[arg(long)]
    protocol: Option<String>,
    /// Training subset for STATIC, e.g. S4 or C2.
    #[arg(long)]
    subset: Option<String>,
    /// Independent seeded attempts; the best by test error is reported.
    #[arg(long)]
    seeds: Option<usize>,
    /// Base seed every per-seed randomness stream derives from.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Run directory, expression file, or reference id (M4S4, MCAR, MGAR).
    #[arg(long)]
    model: String,
    /// Dataset directory produced by `gpvol generate`.
    #[arg(long, value_name = "DIR")]
    data: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directories whose model tables are merged, in order.
    #[arg(long, value_name = "DIR", num_args = 1.., required = true)]
    runs: Vec<PathBuf>,
    /// Destination CSV file.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => commands::generate(args),
        Command::Run(args) => commands::run(args),
        Command::Evaluate(args) => commands::evaluate(args),
        Command::Report(args) => commands::report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Failed(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
