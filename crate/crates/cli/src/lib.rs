//! Scenario files, result rows, sweeps and verification suites on top of
//! `harvest-core`.

pub mod output;
pub mod row;
pub mod scenario;
pub mod verify;

use thiserror::Error;

pub use row::{evaluate_point, run_points, ResultRow, RunOptions};
pub use scenario::{Scenario, ScenarioPoint};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const CONFIG: i32 = 1;
    pub const COMPUTE: i32 = 2;
    pub const VERIFICATION: i32 = 3;
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{file}: {message}")]
    Parse { file: String, message: String },
    #[error("{file}: field `{field}`: {message}")]
    Invalid { file: String, field: String, message: String },
    #[error("cannot read {file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
#[error("scenario `{scenario}`: {message}")]
pub struct ComputeError {
    pub scenario: String,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Compute(#[from] ComputeError),
    #[error("output: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Compute(_) | CliError::Output(_) => exit::COMPUTE,
        }
    }
}
