//! `rigforge`: file-based runs of the rigging and animation pipelines.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod error;
mod provenance;

use error::CliError;

#[derive(Parser)]
#[command(name = "rigforge", version, about = "Character rigging and animation pipelines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every pipeline command.
#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for every randomized step (overrides the config).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (overrides the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Config override; dotted keys reach nested tables, values parse as TOML.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Same as `--set`.
    #[arg(value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Align a detail mesh, transfer the replaceable region and smooth the seam.
    Transfer(RunArgs),
    /// Fit leaf joints and a residual blendshape to a target mesh.
    Calibrate(RunArgs),
    /// Renderer color correction.
    #[command(subcommand)]
    Color(ColorCommand),
    /// Select gesture clips for an audio embedding stream and build a track.
    Compose(RunArgs),
    /// Facial rig regression from audio features.
    #[command(subcommand)]
    Face(FaceCommand),
    /// Regenerate the synthetic fixture pack.
    Fixtures {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum ColorCommand {
    /// Generate or read color pairs and train the corrector.
    Train(RunArgs),
    /// Correct a texture with a trained model.
    Correct(RunArgs),
    /// Blend a relit render with the original image.
    Blend(RunArgs),
}

#[derive(Subcommand)]
enum FaceCommand {
    /// Train the regressor on feature/coefficient track pairs.
    Train(RunArgs),
    /// Predict a coefficient track, optionally splicing interjections.
    Drive(RunArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Transfer(a) => commands::transfer::run(&a),
        Command::Calibrate(a) => commands::calibrate::run(&a),
        Command::Color(ColorCommand::Train(a)) => commands::color::train(&a),
        Command::Color(ColorCommand::Correct(a)) => commands::color::correct(&a),
        Command::Color(ColorCommand::Blend(a)) => commands::color::blend(&a),
        Command::Compose(a) => commands::compose::run(&a),
        Command::Face(FaceCommand::Train(a)) => commands::face::train(&a),
        Command::Face(FaceCommand::Drive(a)) => commands::face::drive(&a),
        Command::Fixtures { out, seed } => commands::fixtures::run(&out, seed),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RIGFORGE_LOG", "warn"))
        .format_timestamp(None)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rigforge: {e}");
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
