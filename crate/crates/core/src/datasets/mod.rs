//! MNIST and CIFAR-100 ingestion, normalization statistics, and
//! deterministic shuffled batches.

mod batch;
mod cifar;
mod idx;
mod normalize;

use std::path::PathBuf;

use thiserror::Error;

use crate::ndtensor::Tensor;

pub use batch::{prefetch, Batch, BatchPlan, Batches, SplitMix64};
pub use cifar::{load_cifar100, parse_cifar100, CIFAR_IMAGE_BYTES, CIFAR_RECORD_BYTES};
pub use idx::{load_mnist, parse_idx_images, parse_idx_labels, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use normalize::Normalization;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{what}: bad magic {found:#010x}, expected {expected:#010x}")]
    BadMagic { what: &'static str, expected: u32, found: u32 },
    #[error("{what}: truncated, header promises {expected} bytes but {actual} are present")]
    Truncated { what: &'static str, expected: usize, actual: usize },
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("file size {size} is not a multiple of the {record}-byte record")]
    RecordSize { size: usize, record: usize },
    #[error("class subset is empty")]
    EmptySubset,
    #[error("class subset: {0}")]
    BadSubset(String),
    #[error("label {label} outside [0, {classes})")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("normalization statistics {path}: {message}")]
    BadStats { path: PathBuf, message: String },
}

impl DatasetError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }
}

/// Images in `[0, 1]` with labels in `[0, num_classes)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub split: String,
    pub images: Tensor<f32>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        split: impl Into<String>,
        images: Tensor<f32>,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self, DatasetError> {
        if images.batch() != labels.len() {
            return Err(DatasetError::CountMismatch { images: images.batch(), labels: labels.len() });
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(DatasetError::LabelOutOfRange { label, classes: num_classes });
        }
        Ok(Self { name: name.into(), split: split.into(), images, labels, num_classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.images.channels()
    }

    /// Samples at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            name: self.name.clone(),
            split: self.split.clone(),
            images: self.images.gather(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }

    /// First `n` samples (all of them if `n` exceeds the size).
    pub fn head(&self, n: usize) -> Self {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.select(&idx)
    }

    /// Raw images widened to `f64`, for the spectral probes.
    pub fn images_f64(&self) -> Tensor<f64> {
        self.images.cast()
    }

    /// Per-class sample counts.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}
