//! Dense 4-D tensors, a reverse-mode tape, and the training numerics
//! (convolutions, batch norm, smoothed cross-entropy, SGD, schedules).

pub mod checkpoint;
pub mod ops;
pub mod optim;
pub mod params;
pub mod scalar;
pub mod schedule;
mod tape;
mod tensor;

use std::fmt::Display;

use thiserror::Error;

pub use ops::conv::{conv2d_forward, conv_out_extent, pointwise_forward};
pub use ops::norm::{BatchStats, RunningStats, BN_EPS, BN_MOMENTUM};
pub use optim::{sgd_step, OptimizerState};
pub use params::{Param, ParamId, ParamKind, ParamStore};
pub use scalar::Scalar;
pub use schedule::LrSchedule;
pub use tape::{Tape, Var};
pub use tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("data length {actual} does not match shape {shape:?} (expected {expected})")]
    DataLength { shape: [usize; 4], expected: usize, actual: usize },
    #[error("shape mismatch in {dim}: expected {expected}, got {actual}")]
    Shape { dim: &'static str, expected: String, actual: String },
    #[error("backward needs a scalar root, got shape {shape:?}")]
    NonScalarRoot { shape: [usize; 4] },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("epoch {epoch} outside a {total}-epoch schedule")]
    EpochOutOfRange { epoch: usize, total: usize },
    #[error("{0}")]
    InvalidArgument(String),
}

impl TensorError {
    pub(crate) fn shape(dim: &'static str, expected: impl Display, actual: impl Display) -> Self {
        Self::Shape { dim, expected: expected.to_string(), actual: actual.to_string() }
    }
}
