//! Command layer of the `cpb` binary.

pub mod commands;
pub mod config;

use cpb_core::CpbError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),

    #[error("{0}")]
    Precondition(String),

    #[error(transparent)]
    Core(#[from] CpbError),

    #[error("{0}")]
    Io(String),

    #[error("suite failed: {0}")]
    SuiteFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::SuiteFailed(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Precondition(_) | CliError::Core(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<config::ConfigError> for CliError {
    fn from(e: config::ConfigError) -> Self {
        CliError::Parse(e.to_string())
    }
}

/// 17 significant digits, enough to reproduce every `f64`.
pub fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}
