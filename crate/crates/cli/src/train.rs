use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use gssd::datasets::{prefetch, BatchPlan, Batches, Normalization};
use gssd::gssdnet::{Network, Trainer, TrainerSettings};
use gssd::ndtensor::checkpoint::{self, digest_bytes};
use gssd::ndtensor::LrSchedule;
use serde::Serialize;

use crate::data::Split;
use crate::error::CliError;
use crate::io::{write_atomic, RunLock};
use crate::run::{count_correct, run_entries};
use crate::runconfig::RunConfig;

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.txt";

pub struct TrainRequest {
    pub config: RunConfig,
    pub out_dir: PathBuf,
    pub data_root: PathBuf,
    pub deterministic: bool,
    pub threads: usize,
}

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub test_accuracy: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub config: String,
    pub seed: u64,
    pub deterministic: bool,
    pub threads: usize,
    pub warmup_epochs_effective: usize,
    pub dataset: String,
    pub dataset_digests: Vec<FileDigest>,
    pub train_samples: usize,
    pub test_samples: usize,
    pub normalization_mean: Vec<f64>,
    pub normalization_std: Vec<f64>,
    pub parameter_count: usize,
    pub epochs: Vec<EpochLog>,
    pub final_accuracy: f64,
    pub final_correct: usize,
    pub final_total: usize,
    pub checkpoint: String,
    pub checkpoint_digest: String,
    pub total_seconds: f64,
}

fn file_digests(paths: &[PathBuf]) -> Result<Vec<FileDigest>, CliError> {
    paths
        .iter()
        .map(|p| {
            let bytes = std::fs::read(p).map_err(|e| CliError::Data(gssd::datasets::DatasetError::Io { path: p.clone(), source: e }))?;
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            Ok(FileDigest { path: name, sha256: digest_bytes(&bytes) })
        })
        .collect()
}

pub fn train(req: &TrainRequest) -> Result<RunManifest, CliError> {
    let cfg = &req.config;
    let _lock = RunLock::acquire(&req.out_dir)?;
    let started = Instant::now();

    let train_set = Arc::new(cfg.data.load(&req.data_root, Split::Train)?);
    let test_set = cfg.data.load(&req.data_root, Split::Test)?;
    let (norm, created) = Normalization::load_or_compute(&cfg.data.kind.dir(&req.data_root), &train_set)?;
    if created {
        eprintln!("computed normalization statistics for {}", train_set.name);
    }
    let mut files = cfg.data.kind.files(&req.data_root, Split::Train);
    files.extend(cfg.data.kind.files(&req.data_root, Split::Test));
    let dataset_digests = file_digests(&files)?;

    let warmup = cfg.effective_warmup();
    if warmup != cfg.warmup_epochs {
        eprintln!("warmup shortened from {} to {warmup} epochs to fit {} epochs", cfg.warmup_epochs, cfg.epochs);
    }
    let schedule = LrSchedule::new(cfg.base_lr, warmup, cfg.epochs)?;
    let mut net = Network::<f32>::new(&cfg.network, cfg.seed)?;
    let settings =
        TrainerSettings { momentum: cfg.momentum, weight_decay: cfg.weight_decay, label_smoothing: cfg.label_smoothing };
    let mut trainer = Trainer::new(&net, settings);
    let test_images = test_set.images_f64();

    let mut logs = Vec::with_capacity(cfg.epochs);
    let mut correct = 0;
    let stdout = std::io::stdout();
    for epoch in 0..cfg.epochs {
        let epoch_start = Instant::now();
        let lr = schedule.lr_at(epoch)?;
        let plan = BatchPlan::new(cfg.seed, epoch, train_set.len(), cfg.batch_size);
        let batches = Batches::new(Arc::clone(&train_set), plan, norm.clone(), cfg.flip);
        let (mut loss_sum, mut seen) = (0.0, 0);
        for batch in prefetch(batches, 2) {
            let report = trainer.step(&mut net, &batch.images, &batch.labels, lr)?;
            loss_sum += report.loss * report.batch_size as f64;
            seen += report.batch_size;
        }
        correct = count_correct(&net, &norm, &test_images, &test_set.labels);
        let log = EpochLog {
            epoch: epoch + 1,
            lr,
            train_loss: loss_sum / seen.max(1) as f64,
            test_accuracy: correct as f64 / test_set.len() as f64,
            wall_seconds: epoch_start.elapsed().as_secs_f64(),
        };
        let mut out = stdout.lock();
        let _ = writeln!(out, "epoch={} lr={} loss={:.6} acc={}", log.epoch, log.lr, log.train_loss, log.test_accuracy);
        let _ = out.flush();
        logs.push(log);
    }

    let entries = run_entries(&net, &norm, &cfg.data);
    let bytes = checkpoint::encode(&entries);
    write_atomic(&req.out_dir.join(CHECKPOINT_FILE), &bytes)?;
    let config_text = cfg.to_kv();
    write_atomic(&req.out_dir.join(CONFIG_FILE), config_text.as_bytes())?;

    let manifest = RunManifest {
        config: config_text,
        seed: cfg.seed,
        deterministic: req.deterministic,
        threads: req.threads,
        warmup_epochs_effective: warmup,
        dataset: train_set.name.clone(),
        dataset_digests,
        train_samples: train_set.len(),
        test_samples: test_set.len(),
        normalization_mean: norm.mean.clone(),
        normalization_std: norm.std.clone(),
        parameter_count: net.parameter_count(),
        final_accuracy: correct as f64 / test_set.len() as f64,
        final_correct: correct,
        final_total: test_set.len(),
        epochs: logs,
        checkpoint: CHECKPOINT_FILE.into(),
        checkpoint_digest: checkpoint::digest_bytes(&bytes),
        total_seconds: started.elapsed().as_secs_f64(),
    };
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    write_atomic(&req.out_dir.join(MANIFEST_FILE), &json)?;
    Ok(manifest)
}

pub fn read_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::ConfigValue(format!("{}: {e}", path.display())))?;
    RunConfig::parse(&text).map_err(|source| CliError::Config { path: path.to_owned(), source })
}
