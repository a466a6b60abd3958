//! Error categories and their process exit codes.

use std::process::ExitCode;

use qubot_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Invalid or malformed configuration (exit 1).
    #[error("configuration error: {0}")]
    Config(String),
    /// Physics or numerical violation during a run, or an I/O failure
    /// (exit 2).
    #[error("runtime error: {0}")]
    Runtime(String),
    /// An embedded acceptance assertion failed in `--check` mode, or the
    /// logical check found a mismatch (exit 3).
    #[error("check failed: {0}")]
    Check(String),
}

impl CliError {
    pub fn config(e: CoreError) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }

    pub fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Check(_) => 3,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code())
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
