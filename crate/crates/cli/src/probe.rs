use std::io::Write;
use std::path::{Path, PathBuf};

use gssd::freqprobe::synthetic::{sinusoid_dataset, NearestCentroid, SINUSOID_FREQUENCIES, SINUSOID_SIDE};
use gssd::freqprobe::{
    curve_svg, curves_from_outcome, format_radius, max_distance, parse_radii, scale_probe, sweep_predictions,
    write_curves_csv, write_predictions_csv, write_scale_summary_csv, LabeledImages, Level, PassType, ScalePoint,
    SensitivityCurve,
};
use gssd::gssdnet::NetClassifier;
use gssd::ndtensor::Tensor;

use crate::error::CliError;
use crate::io::create_file;
use crate::run::{sweep_options, TrainedModel};

/// `0:<ceil of the corner distance>:1`, which ends on the identity filter.
pub fn default_radii(h: usize, w: usize) -> String {
    format!("0:{}:1", max_distance(h, w).ceil())
}

pub fn radii_for(spec: Option<&str>, images: &Tensor<f64>) -> Result<Vec<f64>, CliError> {
    let [_, _, h, w] = images.shape();
    let spec = spec.map(str::to_owned).unwrap_or_else(|| default_radii(h, w));
    Ok(parse_radii(&spec)?)
}

pub struct FreqRequest<'a> {
    pub pass: PassType,
    pub level: Level,
    pub radii: &'a [f64],
    pub parallel: bool,
    pub out: &'a Path,
    pub svg_dir: Option<&'a Path>,
    pub predictions: Option<&'a Path>,
}

pub fn probe_freq(
    model: &TrainedModel,
    images: &Tensor<f64>,
    labels: &[usize],
    num_classes: usize,
    req: &FreqRequest<'_>,
) -> Result<Vec<SensitivityCurve>, CliError> {
    let classifier = NetClassifier::new(&model.net, &model.norm);
    let set = LabeledImages { images, labels, num_classes };
    let outcome = sweep_predictions(&classifier, set, req.radii, req.pass, sweep_options(req.parallel))?;
    let curves = curves_from_outcome(&outcome, labels, num_classes, req.level);
    write_curves(req.out, &curves)?;
    if let Some(path) = req.predictions {
        let mut f = create_file(path)?;
        write_predictions_csv(&mut f, &outcome, labels).and_then(|_| f.flush()).map_err(|e| CliError::output(path, e))?;
    }
    if let Some(dir) = req.svg_dir {
        write_svgs(dir, &curves)?;
    }
    Ok(curves)
}

fn write_curves(path: &Path, curves: &[SensitivityCurve]) -> Result<(), CliError> {
    let mut f = create_file(path)?;
    write_curves_csv(&mut f, curves).and_then(|_| f.flush()).map_err(|e| CliError::output(path, e))
}

fn write_svgs(dir: &Path, curves: &[SensitivityCurve]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))?;
    for c in curves {
        let name = match (c.class_id, c.sample_id) {
            (Some(k), _) => format!("{}_class{k}.svg", c.pass.as_str()),
            (_, Some(s)) => format!("{}_sample{s}.svg", c.pass.as_str()),
            _ => format!("{}_overall.svg", c.pass.as_str()),
        };
        let path = dir.join(name);
        std::fs::write(&path, curve_svg(c)).map_err(|e| CliError::output(&path, e))?;
    }
    Ok(())
}

pub fn curve_file_name(factor: f64) -> String {
    format!("curves_factor{}.csv", format_radius(factor))
}

pub const SUMMARY_FILE: &str = "summary.csv";

/// Per-factor curve files plus the `factor,half_max_radius` summary.
pub fn write_scale_outputs(dir: &Path, points: &[ScalePoint]) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))?;
    for p in points {
        write_curves(&dir.join(curve_file_name(p.factor)), std::slice::from_ref(&p.curve))?;
    }
    let summary = dir.join(SUMMARY_FILE);
    let mut f = create_file(&summary)?;
    write_scale_summary_csv(&mut f, points).and_then(|_| f.flush()).map_err(|e| CliError::output(&summary, e))?;
    Ok(summary)
}

pub fn probe_scale_model(
    model: &TrainedModel,
    images: &Tensor<f64>,
    labels: &[usize],
    num_classes: usize,
    factors: &[f64],
    radii: &[f64],
    parallel: bool,
) -> Result<Vec<ScalePoint>, CliError> {
    let set = LabeledImages { images, labels, num_classes };
    Ok(scale_probe(|_, _| NetClassifier::new(&model.net, &model.norm), set, factors, radii, sweep_options(parallel))?)
}

/// Sinusoid classes probed by a nearest-centroid classifier refitted on
/// the zoomed images at each factor.
pub fn probe_scale_synthetic(
    per_class: usize,
    seed: u64,
    factors: &[f64],
    radii: Option<&str>,
    parallel: bool,
) -> Result<Vec<ScalePoint>, CliError> {
    let (images, labels) = sinusoid_dataset(per_class, SINUSOID_SIDE, &SINUSOID_FREQUENCIES, seed);
    let k = SINUSOID_FREQUENCIES.len();
    let radii = radii_for(radii, &images)?;
    let set = LabeledImages { images: &images, labels: &labels, num_classes: k };
    let fit = |_: f64, zoomed: &Tensor<f64>| NearestCentroid::fit(zoomed, &labels, k);
    Ok(scale_probe(fit, set, factors, &radii, sweep_options(parallel))?)
}
