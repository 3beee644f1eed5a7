//! Error taxonomy mirroring the process exit codes.

use hcma_core::CoreError;
use serde::Serialize;
use thiserror::Error;

/// Every failure is tagged with a machine-parsable code; `main` prints it as
/// a single JSON line on stderr and exits with the matching status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("{0}")]
    Solver(String),

    #[error("{0}")]
    Oracle(String),

    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Solver(_) => "solver",
            CliError::Oracle(_) => "oracle",
            CliError::Io(_) => "io",
        }
    }

    /// 2 config, 3 solver, 4 oracle. I/O problems (unwritable output
    /// directory, unreadable input file) count as configuration errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Oracle(_) => 4,
        }
    }

    pub fn to_json_line(&self) -> String {
        #[derive(Serialize)]
        struct Line<'a> {
            code: &'a str,
            message: String,
        }
        let line = Line {
            code: self.code(),
            message: self.to_string(),
        };
        // A struct of two strings cannot fail to serialize.
        serde_json::to_string(&line).expect("error serialization")
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::NonConvergence { .. }
            | CoreError::LinearSolveFailure { .. }
            | CoreError::DegenerateState { .. } => CliError::Solver(e.to_string()),
            CoreError::DimensionMismatch { .. }
            | CoreError::InvalidParameter(_)
            | CoreError::InfeasibleInput(_) => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
