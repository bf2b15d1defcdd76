//! Configuration, experiment drivers and CSV output for the
//! `clusterherald` command-line tool.

pub mod config;
pub mod experiments;
pub mod output;

use std::path::PathBuf;

pub use config::{parse_config, Experiment, ExperimentConfig};
pub use experiments::run_experiment;
pub use output::{write_tables, Table};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Core(#[from] clusterherald::error::Error),
}

impl CliError {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// Process exit status: 1 I/O, 2 configuration, 3 capacity, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        use clusterherald::error::Error;
        match self {
            CliError::Io { .. } | CliError::Csv(_) => 1,
            CliError::Config { .. } => 2,
            CliError::Core(Error::InvalidParameter { .. }) | CliError::Core(Error::SingularDetuning) => 2,
            CliError::Core(Error::Capacity { .. }) => 3,
            CliError::Core(_) => 4,
        }
    }
}
