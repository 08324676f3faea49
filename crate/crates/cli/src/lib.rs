//! Command-line front end: configuration, subcommands and CSV serialization.

pub mod commands;
pub mod config;
pub mod output;

use std::io;

use latwave_core::LatticeError;
use thiserror::Error;

pub use config::{ConfigError, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("configuration: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 2 usage, 3 domain error, 4 numerical-consistency failure, 1 i/o.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Lattice(LatticeError::Numerical(_)) => 4,
            CliError::Lattice(_) => 3,
            CliError::Io(_) | CliError::Csv(_) => 1,
        }
    }
}
