//! `phmc`: runs coupled pHMC experiments and writes plain-text tables.

mod commands;
mod config;
mod error;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Output;
use crate::config::{ConfigLayer, ExperimentConfig};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "phmc", version, about = "Coupled preconditioned HMC experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat TOML file with the same keys as the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: ConfigLayer,
}

#[derive(Subcommand)]
enum Command {
    /// One coupled pair; per-iteration distance table.
    RunCoupling(Common),
    /// Many coupled pairs; per-iteration mean/min/max distance.
    Average(Common),
    /// Empirical contraction constants as key=value lines.
    Audit(Common),
    /// Same experiment in spectral and grid form.
    CompareRepresentations(Common),
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (name, common, exec): (&str, Common, fn(&ExperimentConfig) -> Result<Output, CliError>) =
        match cli.command {
            Command::RunCoupling(c) => ("run-coupling", c, commands::run_coupling_cmd),
            Command::Average(c) => ("average", c, commands::average_cmd),
            Command::Audit(c) => ("audit", c, commands::audit_cmd),
            Command::CompareRepresentations(c) => {
                ("compare-representations", c, commands::compare_representations_cmd)
            }
        };
    let file = common.config.as_deref().map(ConfigLayer::from_file).transpose()?;
    let config = ExperimentConfig::resolve(name, file.as_ref(), &common.overrides)?;
    let output = exec(&config)?;
    for (path, text) in &output.extra {
        write_file(path, text)?;
    }
    match &config.out {
        Some(path) => write_file(path, &output.main),
        None => {
            print!("{}", output.main);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("phmc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
