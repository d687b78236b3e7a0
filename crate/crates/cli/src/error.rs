use std::path::PathBuf;

use gssd::datasets::DatasetError;
use gssd::freqprobe::FreqProbeError;
use gssd::gssdnet::{ConfigError, NetError};
use gssd::ndtensor::checkpoint::CheckpointError;
use gssd::ndtensor::TensorError;
use thiserror::Error;

/// Process exit statuses, one per failure family.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INTERNAL: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const CONFIG: i32 = 3;
    pub const DATA: i32 = 4;
    pub const CHECKPOINT: i32 = 5;
    pub const OUTPUT: i32 = 6;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config {path}: {source}")]
    Config { path: PathBuf, source: ConfigError },
    #[error("config: {0}")]
    ConfigValue(String),
    #[error("dataset: {0}")]
    Data(#[from] DatasetError),
    #[error("checkpoint {path}: {source}")]
    Checkpoint { path: PathBuf, source: CheckpointError },
    #[error("checkpoint {path}: {message}")]
    CheckpointContent { path: PathBuf, message: String },
    #[error("architecture mismatch: checkpoint holds '{found}', expected '{expected}'")]
    ArchMismatch { expected: String, found: String },
    #[error("{path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
    #[error("output directory {0} is in use by another run (lock file present)")]
    Locked(PathBuf),
    #[error("probe: {0}")]
    Probe(#[from] FreqProbeError),
    #[error("network: {0}")]
    Net(#[from] NetError),
    #[error("tensor: {0}")]
    Tensor(#[from] TensorError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Config { .. } | CliError::ConfigValue(_) => exit::CONFIG,
            CliError::Data(_) => exit::DATA,
            CliError::Checkpoint { .. } | CliError::CheckpointContent { .. } | CliError::ArchMismatch { .. } => {
                exit::CHECKPOINT
            }
            CliError::Output { .. } | CliError::Locked(_) => exit::OUTPUT,
            CliError::Probe(FreqProbeError::Radii(_) | FreqProbeError::Factor(_)) => exit::USAGE,
            CliError::Probe(_) | CliError::Net(_) | CliError::Tensor(_) => exit::INTERNAL,
        }
    }

    pub fn output(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Output { path: path.into(), source }
    }
}
