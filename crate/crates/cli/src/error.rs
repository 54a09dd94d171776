use std::path::PathBuf;

use que_core::QueError;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_BOUND_VIOLATION: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid value for `{key}`: {reason}")]
    InvalidKey { key: String, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] QueError),
    #[error("{0}")]
    Encoding(String),
}

impl CliError {
    pub fn key(key: &str, reason: impl Into<String>) -> Self {
        CliError::InvalidKey {
            key: key.to_string(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::InvalidKey { .. } | CliError::Io { .. } => EXIT_USAGE,
            CliError::Core(e) => match e {
                QueError::ResourceLimit { .. }
                | QueError::Validation(_)
                | QueError::Domain(_)
                | QueError::Configuration(_)
                | QueError::UnsupportedReference
                | QueError::Format(_) => EXIT_USAGE,
                _ => EXIT_NUMERICAL,
            },
            CliError::Encoding(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Encoding(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Encoding(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
