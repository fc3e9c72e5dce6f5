use std::path::PathBuf;

use thiserror::Error;

/// What failed during scenario validation; decides the exit code per command.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Connectivity,
    Weights,
    Game,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error in {origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("{field}: {message}")]
    Invalid { kind: ErrorKind, field: String, message: String },
    #[error("certificate failed: {0}")]
    Certificate(String),
    #[error("{0}")]
    Runtime(String),
}

/// Invalid input, including unwritable output paths.
pub const EXIT_INVALID: i32 = 2;
/// A stability certificate or a weight-stochasticity check failed.
pub const EXIT_CERTIFICATE: i32 = 5;
pub const EXIT_INTERNAL: i32 = 1;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Parse { .. } | CliError::Invalid { .. } => EXIT_INVALID,
            CliError::Certificate(_) => EXIT_CERTIFICATE,
            CliError::Runtime(_) => EXIT_INTERNAL,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}
