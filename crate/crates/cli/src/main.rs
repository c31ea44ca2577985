use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Parser, Debug)]
#[command(
    name = "wxgen",
    version,
    about = "Train, sample and evaluate a dilated-convolution daily weather generator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a model on the training period and write its best checkpoint.
    Train(TrainArgs),
    /// Sample an ensemble from a trained checkpoint.
    Generate(SampleArgs),
    /// Resample historical years into an ensemble.
    Baseline(SampleArgs),
    /// Error tables for ensembles against observed weather and yields.
    Evaluate(OutArgs),
    /// Print the planned architecture.
    Inspect(ConfigArg),
}

#[derive(Args, Debug)]
pub struct ConfigArg {
    #[arg(long, short)]
    pub config: PathBuf,
}

#[derive(Args, Debug)]
pub struct OutArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Output directory, replacing the configured one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub base: OutArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[command(flatten)]
    pub base: OutArgs,
    /// Master seed for the ensemble.
    #[arg(long)]
    pub seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => commands::train(&a),
        Command::Generate(a) => commands::generate(&a),
        Command::Baseline(a) => commands::baseline(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Inspect(a) => commands::inspect(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
