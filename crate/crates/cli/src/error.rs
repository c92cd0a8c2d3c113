use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error(transparent)]
    Solver(#[from] qentropy::Error),
    #[error("cannot write CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("cannot encode report: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 1 solver failure, 2 unreadable or invalid input, 3 degenerate
    /// expectation matching.
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Io { .. } | CliError::Parse { .. } | CliError::Invalid(_) => ExitCode::from(2),
            CliError::Solver(qentropy::Error::MatchingDegenerate { .. }) => ExitCode::from(3),
            CliError::Solver(_) | CliError::Csv(_) | CliError::Json(_) => ExitCode::from(1),
        }
    }
}
