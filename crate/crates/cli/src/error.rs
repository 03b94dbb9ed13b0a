use std::path::Path;

use thiserror::Error;

/// Harness errors; each maps to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed command line. Exits 1 after printing usage.
    #[error("{0}")]
    Usage(String),

    /// Invalid, inconsistent, or unreadable configuration or output
    /// location. Exits 1.
    #[error("configuration error: {0}")]
    Config(String),

    /// A computation failed numerically. Exits 2.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// The equivalence check ran but did not pass. Exits 3.
    #[error("equivalence check failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::CheckFailed(_) => 3,
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Config(format!("{}: {err}", path.display()))
    }
}

impl From<rkde_core::Error> for CliError {
    fn from(err: rkde_core::Error) -> Self {
        match err {
            rkde_core::Error::Numerical(msg) => CliError::Numerical(msg),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(err: serde_json::Error) -> Self {
        CliError::Config(err.to_string())
    }
}
