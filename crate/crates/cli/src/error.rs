//! Errors and the machine-readable report printed on failure.

use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;
use vcse_core::trainer::TrainError;

#[derive(Debug, Error)]
pub enum CliError {
    /// The config is malformed or inconsistent; nothing was run.
    #[error("{message}")]
    Config { field: Option<String>, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Training failed after it started.
    #[error("seed {seed}: {source}")]
    Run {
        seed: u64,
        #[source]
        source: TrainError,
    },
    #[error("{0}")]
    Artifact(String),
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config { field: None, message: message.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 2 for config errors, 3 for failures at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            _ => 3,
        }
    }

    pub fn report(&self) -> ErrorReport {
        let kind = match self {
            CliError::Config { .. } => "config",
            CliError::Io { .. } => "io",
            CliError::Run { .. } => "run",
            CliError::Artifact(_) => "artifact",
        };
        ErrorReport {
            kind,
            exit_code: self.exit_code(),
            field: match self {
                CliError::Config { field, .. } => field.clone(),
                _ => None,
            },
            seed: match self {
                CliError::Run { seed, .. } => Some(*seed),
                _ => None,
            },
            message: self.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub kind: &'static str,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub message: String,
}
