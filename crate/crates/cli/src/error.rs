use std::path::PathBuf;

use thiserror::Error;

/// Failures of a CLI invocation, grouped by the error code printed on stderr.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }

    /// Machine-parsable prefix written before the message.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "E_IO",
            CliError::Parse(_) => "E_PARSE",
            CliError::Validation(_) => "E_VALIDATION",
            CliError::Runtime(_) => "E_RUNTIME",
        }
    }

    /// 1 for bad inputs, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Runtime(_) => 2,
            _ => 1,
        }
    }
}
