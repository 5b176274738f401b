//! Command-line harness: data generation, decoding, learning, TV
//! evaluation and seeded sample-complexity sweeps.

pub mod commands;
pub mod error;
pub mod output;
pub mod settings;
pub mod sweep;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use error::{CliError, ExitStatus, EXIT_CODES_HELP};
pub use settings::Settings;

#[derive(Debug, Parser)]
#[command(name = "dpmix", version, about = "Differentially private learning of Gaussian mixtures", after_help = EXIT_CODES_HELP)]
pub struct Cli {
    #[command(flatten)]
    pub settings: Settings,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw --n rows from --model and write them as CSV
    Gen,
    /// Run a private list decoder on --input and write the candidate list
    Decode,
    /// Learn a k-mixture from --input; writes the model and a run report
    Learn,
    /// Total variation distance between two model files
    Eval { model_a: PathBuf, model_b: PathBuf },
    /// Success rate of a seeded experiment over a grid of n and one parameter
    Sweep,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let settings = cli.settings.resolve()?;
    match cli.command {
        Command::Gen => commands::gen(&settings),
        Command::Decode => commands::decode(&settings),
        Command::Learn => commands::learn(&settings),
        Command::Eval { model_a, model_b } => commands::eval(&settings, &model_a, &model_b),
        Command::Sweep => sweep::sweep(&settings),
    }
}
