use std::path::PathBuf;

use phmc_core::PhmcError;
use thiserror::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;
pub const EXIT_OTHER: i32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("cannot read config file {}: {message}", path.display())]
    ConfigFile { path: PathBuf, message: String },

    #[error("divergence at iteration {iter}: {source}")]
    Divergence { iter: usize, source: PhmcError },

    #[error(transparent)]
    Core(PhmcError),

    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(field: &str, reason: impl Into<String>) -> Self {
        CliError::Config {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::ConfigFile { .. } => EXIT_CONFIG,
            CliError::Divergence { .. } => EXIT_DIVERGENCE,
            CliError::Core(_) | CliError::Io { .. } => EXIT_OTHER,
        }
    }
}

impl From<PhmcError> for CliError {
    fn from(e: PhmcError) -> Self {
        if e.is_divergence() {
            let iter = match &e {
                PhmcError::AtIteration { iter, .. } => *iter,
                _ => 0,
            };
            return CliError::Divergence {
                iter,
                source: e.root_cause().clone(),
            };
        }
        match e.root_cause() {
            PhmcError::InvalidParameter { name, reason } => CliError::config(name, reason.clone()),
            PhmcError::ExactFlowUnavailable { .. } => CliError::config("mode", e.to_string()),
            _ => CliError::Core(e),
        }
    }
}
