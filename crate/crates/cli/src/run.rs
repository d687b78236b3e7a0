//! Checkpoint layout of a training run: network tensors plus the data
//! selection and normalization needed to evaluate it.

use std::path::Path;

use gssd::datasets::Normalization;
use gssd::freqprobe::{Classifier, SweepOptions};
use gssd::gssdnet::{NetClassifier, Network};
use gssd::ndtensor::checkpoint::{self, Entry};
use gssd::ndtensor::Tensor;

use crate::data::DataSpec;
use crate::error::CliError;

pub const NORMALIZATION_ENTRY: &str = "meta.normalization";
pub const DATA_PREFIX: &str = "meta.data:";

/// Batch size for every evaluation, shared with the probes.
pub const EVAL_BATCH: usize = 256;

pub fn sweep_options(parallel: bool) -> SweepOptions {
    SweepOptions { batch_size: EVAL_BATCH, parallel }
}

pub struct TrainedModel {
    pub net: Network<f32>,
    pub norm: Normalization,
    pub data: Option<DataSpec>,
}

pub fn run_entries(net: &Network<f32>, norm: &Normalization, data: &DataSpec) -> Vec<Entry> {
    let mut entries = net.to_entries();
    entries.insert(1, Entry { name: format!("{DATA_PREFIX}{}", data.to_kv()), extents: [0; 4], data: Vec::new() });
    let c = norm.channels();
    let values = norm.mean.iter().chain(&norm.std).map(|&v| v as f32).collect();
    entries.insert(2, Entry { name: NORMALIZATION_ENTRY.into(), extents: [2, c as u32, 1, 1], data: values });
    entries
}

pub fn load_model(path: &Path) -> Result<TrainedModel, CliError> {
    let ck_err = |source| CliError::Checkpoint { path: path.to_owned(), source };
    let content = |message: String| CliError::CheckpointContent { path: path.to_owned(), message };
    let entries = checkpoint::load(path).map_err(ck_err)?;
    let net = Network::<f32>::from_entries(&entries).map_err(|e| content(e.to_string()))?;
    let channels = net.config().input_channels;
    let norm = match entries.iter().find(|e| e.name == NORMALIZATION_ENTRY) {
        Some(e) => {
            if e.shape() != [2, channels, 1, 1] {
                return Err(content(format!("{NORMALIZATION_ENTRY} has extents {:?}", e.extents)));
            }
            let (mean, std) = e.data.split_at(channels);
            Normalization {
                mean: mean.iter().map(|&v| v as f64).collect(),
                std: std.iter().map(|&v| v as f64).collect(),
            }
        }
        None => Normalization::identity(channels),
    };
    let data = entries
        .iter()
        .find_map(|e| e.name.strip_prefix(DATA_PREFIX))
        .map(DataSpec::parse)
        .transpose()
        .map_err(|e| content(format!("data entry: {e}")))?;
    Ok(TrainedModel { net, norm, data })
}

/// Correct predictions over raw `[0, 1]` images, through the same classifier
/// the probes use.
pub fn count_correct(net: &Network<f32>, norm: &Normalization, images: &Tensor<f64>, labels: &[usize]) -> usize {
    let classifier = NetClassifier::new(net, norm);
    let n = images.batch();
    (0..n)
        .step_by(EVAL_BATCH)
        .map(|start| {
            let count = EVAL_BATCH.min(n - start);
            let preds = classifier.classify(&images.batch_slice(start, count));
            preds.iter().zip(&labels[start..start + count]).filter(|(p, y)| p == y).count()
        })
        .sum()
}
