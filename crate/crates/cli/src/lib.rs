//! Experiment runner for quench studies: reads a TOML configuration, runs
//! DMRG, TEBD and the distance analysis for every sweep point, and writes
//! CSV tables plus a JSON manifest.

pub mod config;
pub mod oracle;
pub mod output;
pub mod runner;

pub use config::ExperimentConfig;
pub use oracle::{run_oracle_check, OracleReport, OracleTolerances};
pub use runner::{run_quench_experiment, ExperimentOutcome, QuenchResult};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("numerical abort: {0}")]
    Numerical(String),

    #[error("oracle check failed: {0}")]
    OracleFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::OracleFailed(_) => 4,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
