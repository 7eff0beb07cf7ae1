//! Batch front-end: run configuration, task orchestration, periodic-orbit census and
//! artifact emission with content-hashed manifests.

pub mod census;
pub mod config;
pub mod run;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("budget of {0} s exceeded")]
    BudgetExceeded(u64),
    #[error(transparent)]
    Compute(#[from] symhom::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Compute(symhom::Error::InvalidSpec(_)) => 2,
            CliError::BudgetExceeded(_) => 3,
            _ => 1,
        }
    }
}
