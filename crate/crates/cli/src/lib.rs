//! Command-line driver: render prompts, check replies offline, make calls,
//! run benchmarks and reproduce the published score table.

pub mod commands;
pub mod config;
pub mod files;
pub mod typetext;

use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unreadable or invalid files, missing configuration.
    #[error("{0}")]
    Usage(String),
    /// The method ran but did not produce what was asked for.
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Failure(_) => ExitCode::from(1),
        }
    }
}
