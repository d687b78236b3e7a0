//! `gssd`: train, evaluate and probe Gaussian scale-space derivative
//! networks.

mod data;
mod error;
mod io;
mod probe;
mod run;
mod runconfig;
mod train;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gssd::freqprobe::{Level, PassType};
use gssd::gssdnet::{operator_set, Arch, DerivativeOrders};
use gssd::ndtensor::checkpoint;
use gssd::scalespace::format_weights;

use data::{data_root, parse_subset, DataSpec, DatasetKind, Split};
use error::{exit, CliError};
use run::{count_correct, load_model, TrainedModel};

#[derive(Parser)]
#[command(name = "gssd", version, about = "Gaussian scale-space derivative networks: training and frequency probes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a network from a run config and write checkpoint + manifest.
    Train(TrainArgs),
    /// Top-1 accuracy of a checkpoint.
    Eval(EvalArgs),
    /// Accuracy against ideal low- or high-pass filter radius.
    ProbeFreq(ProbeFreqArgs),
    /// Low-pass sweeps of zoomed images, one per rescale factor.
    ProbeScale(ProbeScaleArgs),
    /// Print the fixed derivative kernels.
    Kernels(KernelArgs),
    /// SHA-256 of a checkpoint's canonical encoding.
    Digest(DigestArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// One worker thread and a fixed reduction order.
    #[arg(long)]
    deterministic: bool,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    epochs: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    device_threads: Option<u64>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
}

/// Data selection; unset fields fall back to what the checkpoint records.
#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    dataset: Option<DatasetKind>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    split: Split,
    /// Keep only the first N samples.
    #[arg(long)]
    limit: Option<usize>,
    /// Comma-separated class indices, relabelled by position.
    #[arg(long, value_parser = parse_subset)]
    subset: Option<Vec<usize>>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Expected architecture; a different one in the checkpoint is an error.
    #[arg(long)]
    arch: Option<Arch>,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args)]
struct ProbeFreqArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value = "low")]
    pass: PassType,
    /// Inclusive `start:stop:step`; defaults to 0 up to the spectrum corner.
    #[arg(long)]
    radii: Option<String>,
    #[arg(long, default_value = "overall")]
    level: Level,
    #[arg(long)]
    out: PathBuf,
    /// Directory for one SVG plot per curve.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Per-sample predictions at every radius.
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Sweep on the calling thread only.
    #[arg(long)]
    serial: bool,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args)]
struct ProbeScaleArgs {
    #[arg(long, required_unless_present = "synthetic")]
    checkpoint: Option<PathBuf>,
    /// Probe sinusoid images with a nearest-centroid classifier instead.
    #[arg(long, conflicts_with = "checkpoint")]
    synthetic: bool,
    #[arg(long, default_value = "20")]
    per_class: usize,
    #[arg(long, default_value = "0")]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    factors: Vec<f64>,
    #[arg(long)]
    radii: Option<String>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    serial: bool,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args)]
struct KernelArgs {
    #[arg(long, default_value = "1.0")]
    sigma: f64,
    #[arg(long, default_value = "second")]
    orders: DerivativeOrders,
}

#[derive(Args)]
struct DigestArgs {
    checkpoint: PathBuf,
}

/// Worker count: `--device-threads`, else `GSSD_THREADS`, else every core.
fn worker_threads(flag: Option<u64>, deterministic: bool) -> Result<usize, CliError> {
    if deterministic {
        return Ok(1);
    }
    if let Some(n) = flag {
        return Ok(n as usize);
    }
    if let Ok(v) = std::env::var("GSSD_THREADS") {
        return match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Usage(format!("GSSD_THREADS must be a positive integer, got '{v}'"))),
        };
    }
    Ok(std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn init_pool(threads: usize) {
    // Only fails if a pool already exists, which keeps its size.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
}

/// Resolves the data flags against the checkpoint's record and loads the
/// requested split as `f64` images.
fn resolve_data(model: &TrainedModel, args: &DataArgs) -> Result<(DataSpec, gssd::datasets::Dataset), CliError> {
    let mut spec = model.data.clone().unwrap_or_else(|| DataSpec::new(DatasetKind::Mnist));
    if let Some(kind) = args.dataset {
        if Some(kind) != model.data.as_ref().map(|d| d.kind) {
            spec = DataSpec::new(kind);
        }
    }
    if let Some(subset) = &args.subset {
        spec.subset = Some(subset.clone());
    }
    if args.limit.is_some() {
        spec.train_limit = args.limit;
        spec.test_limit = args.limit;
    }
    let set = spec.load(&data_root(args.data_dir.as_deref()), args.split)?;
    let net = model.net.config();
    if set.channels() != net.input_channels || set.num_classes != net.num_classes {
        return Err(CliError::Usage(format!(
            "data has {} channels and {} classes; checkpoint expects {} and {}",
            set.channels(),
            set.num_classes,
            net.input_channels,
            net.num_classes
        )));
    }
    Ok((spec, set))
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let mut config = train::read_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(epochs) = args.epochs {
        config.epochs = epochs as usize;
    }
    let threads = worker_threads(args.device_threads, args.deterministic)?;
    init_pool(threads);
    let req = train::TrainRequest {
        config,
        out_dir: args.out,
        data_root: data_root(args.data_dir.as_deref()),
        deterministic: args.deterministic,
        threads,
    };
    let manifest = train::train(&req)?;
    println!("checkpoint={} digest={}", req.out_dir.join(train::CHECKPOINT_FILE).display(), manifest.checkpoint_digest);
    Ok(())
}

fn load_checked(path: &Path, arch: Option<Arch>) -> Result<TrainedModel, CliError> {
    let model = load_model(path)?;
    if let Some(expected) = arch {
        let found = model.net.config().arch;
        if found != expected {
            return Err(CliError::ArchMismatch { expected: expected.to_string(), found: found.to_string() });
        }
    }
    Ok(model)
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let model = load_checked(&args.checkpoint, args.arch)?;
    let (_, set) = resolve_data(&model, &args.data)?;
    let correct = count_correct(&model.net, &model.norm, &set.images_f64(), &set.labels);
    println!("top1={} n={}", correct as f64 / set.len() as f64, set.len());
    Ok(())
}

fn cmd_probe_freq(args: ProbeFreqArgs) -> Result<(), CliError> {
    let model = load_model(&args.checkpoint)?;
    let (_, set) = resolve_data(&model, &args.data)?;
    let images = set.images_f64();
    let radii = probe::radii_for(args.radii.as_deref(), &images)?;
    init_pool(worker_threads(None, false)?);
    let req = probe::FreqRequest {
        pass: args.pass,
        level: args.level,
        radii: &radii,
        parallel: !args.serial,
        out: &args.out,
        svg_dir: args.svg.as_deref(),
        predictions: args.predictions.as_deref(),
    };
    let curves = probe::probe_freq(&model, &images, &set.labels, set.num_classes, &req)?;
    println!("curves={} radii={} out={}", curves.len(), radii.len(), args.out.display());
    Ok(())
}

fn cmd_probe_scale(args: ProbeScaleArgs) -> Result<(), CliError> {
    init_pool(worker_threads(None, false)?);
    let parallel = !args.serial;
    let points = match &args.checkpoint {
        Some(path) => {
            let model = load_model(path)?;
            let (_, set) = resolve_data(&model, &args.data)?;
            let images = set.images_f64();
            let radii = probe::radii_for(args.radii.as_deref(), &images)?;
            probe::probe_scale_model(&model, &images, &set.labels, set.num_classes, &args.factors, &radii, parallel)?
        }
        None => probe::probe_scale_synthetic(args.per_class, args.seed, &args.factors, args.radii.as_deref(), parallel)?,
    };
    let summary = probe::write_scale_outputs(&args.out_dir, &points)?;
    for p in &points {
        let h = p.half_max.map_or_else(|| "undefined".to_owned(), |h| h.to_string());
        println!("factor={} half_max_radius={h}", gssd::freqprobe::format_radius(p.factor));
    }
    println!("summary={}", summary.display());
    Ok(())
}

fn cmd_kernels(args: KernelArgs) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    for op in operator_set(args.orders) {
        let weights = op.weights::<f64>(args.sigma).map_err(|e| CliError::Usage(e.to_string()))?;
        let side = (weights.len() as f64).sqrt().round() as usize;
        let text = format!("# {} sigma={} side={side}\n{}", op.label(), args.sigma, format_weights(&weights, side));
        out.write_all(text.as_bytes()).map_err(|e| CliError::output("stdout", e))?;
    }
    Ok(())
}

fn cmd_digest(args: DigestArgs) -> Result<(), CliError> {
    let entries = checkpoint::load(&args.checkpoint)
        .map_err(|source| CliError::Checkpoint { path: args.checkpoint.clone(), source })?;
    println!("{}", checkpoint::digest(&entries));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::ProbeFreq(a) => cmd_probe_freq(a),
        Command::ProbeScale(a) => cmd_probe_scale(a),
        Command::Kernels(a) => cmd_kernels(a),
        Command::Digest(a) => cmd_digest(a),
    };
    match result {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
