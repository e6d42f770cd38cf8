//! CLI error taxonomy and process exit codes.

use std::fmt;

/// Exit codes: 0 success, 2 validation error, 3 dependency error,
/// 4 runtime failure.
#[derive(Debug)]
pub enum CliError {
    /// The run configuration (or command usage) is invalid; the
    /// message names the offending field path.
    Validation(String),
    /// A required upstream artifact is missing; the message names the
    /// missing file and the command that produces it.
    Dependency(String),
    /// Everything else.
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Dependency(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn dependency(msg: impl Into<String>) -> Self {
        CliError::Dependency(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Dependency(m) => write!(f, "dependency error: {m}"),
            CliError::Runtime(e) => write!(f, "error: {e:#}"),
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Runtime(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;
