//! CLI error taxonomy and exit-code mapping.

use tapestry::algebra::AlgebraError;
use thiserror::Error;

use crate::parser::ParseError;

/// Exit codes: 0 pass, 2 numerical check failed, 3 config invalid,
/// 4 enumeration cap exceeded.
pub const EXIT_CHECK_FAILED: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_CAP: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("cap exceeded: {0}")]
    Cap(String),
    #[error("engine error: {0}")]
    Engine(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn from_algebra(e: AlgebraError) -> Self {
        match e {
            AlgebraError::CapExceeded(_) => CliError::Cap(e.to_string()),
            other => CliError::Engine(other.to_string()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Cap(_) => EXIT_CAP,
            _ => EXIT_CONFIG,
        }
    }
}

impl From<crate::config::ConfigError> for CliError {
    fn from(e: crate::config::ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}
