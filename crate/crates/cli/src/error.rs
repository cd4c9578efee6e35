use std::process::ExitCode;

use thiserror::Error;
use vfd_core::VfdError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(#[from] VfdError),

    /// A check the run is supposed to certify did not hold.
    #[error("check failed: {0}")]
    Check(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            Self::Config(_) | Self::Io(_) => ExitCode::from(1),
            _ => ExitCode::from(2),
        }
    }
}
