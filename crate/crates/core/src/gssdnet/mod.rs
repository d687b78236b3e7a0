//! GSSDNet and its depthwise-separable baseline: fixed Gaussian blur and
//! derivative operators on half the channels, learned 1x1 mixing.

mod classifier;
mod config;
mod model;
mod operators;
mod train;

use thiserror::Error;

use crate::ndtensor::checkpoint::CheckpointError;
use crate::ndtensor::TensorError;
use crate::scalespace::ScaleSpaceError;

pub use classifier::NetClassifier;
pub use config::{
    apply_width_multiplier, parse_kv, parse_value, Arch, BlockSpec, ConfigError, DerivativeOrders, NetworkConfig,
    Preset, NETWORK_KEYS,
};
pub use model::{argmax_rows, config_from_entries, operator_split, BnUpdate, ForwardPass, LossAndGradients, Network, META_NAMESPACE, META_PREFIX};
pub use operators::{assign_operator, kernel_bank, operator_set, OperatorKind, ALL_OPERATORS};
pub use train::{StepReport, Trainer, TrainerSettings};

#[derive(Debug, Error)]
pub enum NetError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Kernel(#[from] ScaleSpaceError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("checkpoint carries no network configuration")]
    MissingMetadata,
}
