use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] phenorag_core::config::ConfigError),
    #[error("{0}")]
    Ingest(String),
    #[error("{0}")]
    Index(String),
    #[error("{0}")]
    Provider(String),
    #[error("{0}")]
    Eval(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Ingest(_) => 2,
            CliError::Index(_) => 3,
            CliError::Provider(_) => 4,
            CliError::Eval(_) => 5,
        })
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

/// Attaches a path to an error message.
pub fn at(path: &std::path::Path, e: impl std::fmt::Display) -> String {
    format!("{}: {e}", path.display())
}
