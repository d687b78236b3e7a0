use rayon::prelude::*;

use crate::ndtensor::Tensor;

use super::resample::rescale_and_crop;
use super::spectrum::{Fft2, IdealFilter, PassType};
use super::FreqProbeError;

/// Anything that labels a batch of raw `[0, 1]` images.
pub trait Classifier: Sync {
    fn classify(&self, images: &Tensor<f64>) -> Vec<usize>;
}

impl<C: Classifier + ?Sized> Classifier for &C {
    fn classify(&self, images: &Tensor<f64>) -> Vec<usize> {
        (**self).classify(images)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LabeledImages<'a> {
    pub images: &'a Tensor<f64>,
    pub labels: &'a [usize],
    pub num_classes: usize,
}

impl LabeledImages<'_> {
    fn validate(&self) -> Result<(), FreqProbeError> {
        if self.images.batch() == 0 {
            return Err(FreqProbeError::EmptyDataset);
        }
        if self.labels.len() != self.images.batch() {
            return Err(FreqProbeError::LabelCount { images: self.images.batch(), labels: self.labels.len() });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SweepOptions {
    pub batch_size: usize,
    pub parallel: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { batch_size: 256, parallel: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Level {
    Overall,
    Class,
    Sample,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Overall => "overall",
            Level::Class => "class",
            Level::Sample => "sample",
        }
    }
}

impl std::str::FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "overall" => Ok(Self::Overall),
            "class" => Ok(Self::Class),
            "sample" => Ok(Self::Sample),
            other => Err(format!("unknown level '{other}' (overall|class|sample)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub radius: f64,
    pub n_correct: usize,
    pub n_total: usize,
}

impl CurvePoint {
    pub fn accuracy(&self) -> f64 {
        self.n_correct as f64 / self.n_total as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityCurve {
    pub level: Level,
    pub class_id: Option<usize>,
    pub sample_id: Option<usize>,
    pub pass: PassType,
    pub points: Vec<CurvePoint>,
}

impl SensitivityCurve {
    pub fn accuracy_at(&self, radius: f64) -> Option<f64> {
        self.points.iter().find(|p| p.radius == radius).map(CurvePoint::accuracy)
    }

    pub fn final_accuracy(&self) -> Option<f64> {
        self.points.last().map(CurvePoint::accuracy)
    }
}

/// Predicted labels for every (radius, sample) pair of one sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutcome {
    pub radii: Vec<f64>,
    pub pass: PassType,
    pub predictions: Vec<Vec<usize>>,
}

pub fn validate_radii(radii: &[f64]) -> Result<(), FreqProbeError> {
    if radii.is_empty() {
        return Err(FreqProbeError::Radii("radius list is empty".into()));
    }
    if let Some(r) = radii.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
        return Err(FreqProbeError::Radii(format!("radius {r} must be finite and >= 0")));
    }
    if let Some(w) = radii.windows(2).find(|w| w[1] <= w[0]) {
        return Err(FreqProbeError::Radii(format!("radii must increase strictly ({} then {})", w[0], w[1])));
    }
    Ok(())
}

fn filter_batch(batch: &Tensor<f64>, filter: IdealFilter) -> Result<Tensor<f64>, FreqProbeError> {
    let [n, c, h, w] = batch.shape();
    if filter.is_identity(h, w) {
        return Ok(batch.clone());
    }
    let fft = Fft2::new(h, w);
    let keep = filter.mask(h, w);
    let mut out = Tensor::zeros(batch.shape());
    for i in 0..n {
        for ch in 0..c {
            let plane = fft.filter(batch.plane(i, ch), &keep)?;
            out.plane_mut(i, ch).copy_from_slice(&plane);
        }
    }
    Ok(out)
}

/// Filters and classifies every image at every radius.
///
/// Work is split into (radius, batch) tasks with a fixed partition; each
/// task is independent, so serial and parallel runs agree exactly.
pub fn sweep_predictions<C: Classifier + ?Sized>(
    model: &C,
    set: LabeledImages<'_>,
    radii: &[f64],
    pass: PassType,
    opts: SweepOptions,
) -> Result<SweepOutcome, FreqProbeError> {
    set.validate()?;
    validate_radii(radii)?;
    let n = set.images.batch();
    let bs = opts.batch_size.max(1);
    let chunks: Vec<(usize, usize)> = (0..n).step_by(bs).map(|s| (s, bs.min(n - s))).collect();
    let tasks: Vec<(usize, usize)> =
        (0..radii.len()).flat_map(|r| (0..chunks.len()).map(move |c| (r, c))).collect();
    let run = |&(ri, ci): &(usize, usize)| -> Result<Vec<usize>, FreqProbeError> {
        let (start, count) = chunks[ci];
        let filtered = filter_batch(&set.images.batch_slice(start, count), IdealFilter { radius: radii[ri], pass })?;
        let labels = model.classify(&filtered);
        assert_eq!(labels.len(), count, "classifier must label every image");
        Ok(labels)
    };
    let results: Vec<Vec<usize>> = if opts.parallel {
        tasks.par_iter().map(run).collect::<Result<_, _>>()?
    } else {
        tasks.iter().map(run).collect::<Result<_, _>>()?
    };
    let mut predictions = vec![Vec::with_capacity(n); radii.len()];
    for (&(ri, _), labels) in tasks.iter().zip(results) {
        predictions[ri].extend(labels);
    }
    Ok(SweepOutcome { radii: radii.to_vec(), pass, predictions })
}

/// Aggregates a sweep into curves at the requested granularity. Class
/// curves are emitted for every class that has at least one sample.
pub fn curves_from_outcome(
    outcome: &SweepOutcome,
    labels: &[usize],
    num_classes: usize,
    level: Level,
) -> Vec<SensitivityCurve> {
    let curve = |class_id, sample_id, select: &dyn Fn(usize) -> bool| {
        let points = outcome
            .radii
            .iter()
            .zip(&outcome.predictions)
            .map(|(&radius, preds)| {
                let (mut n_correct, mut n_total) = (0, 0);
                for (i, (&p, &y)) in preds.iter().zip(labels).enumerate() {
                    if select(i) {
                        n_total += 1;
                        n_correct += usize::from(p == y);
                    }
                }
                CurvePoint { radius, n_correct, n_total }
            })
            .collect();
        SensitivityCurve { level, class_id, sample_id, pass: outcome.pass, points }
    };
    match level {
        Level::Overall => vec![curve(None, None, &|_| true)],
        Level::Class => (0..num_classes)
            .filter(|k| labels.contains(k))
            .map(|k| curve(Some(k), None, &|i| labels[i] == k))
            .collect(),
        Level::Sample => (0..labels.len()).map(|s| curve(None, Some(s), &|i| i == s)).collect(),
    }
}

pub fn sensitivity_sweep<C: Classifier + ?Sized>(
    model: &C,
    set: LabeledImages<'_>,
    radii: &[f64],
    pass: PassType,
    level: Level,
    opts: SweepOptions,
) -> Result<Vec<SensitivityCurve>, FreqProbeError> {
    let outcome = sweep_predictions(model, set, radii, pass, opts)?;
    Ok(curves_from_outcome(&outcome, set.labels, set.num_classes, level))
}

/// Smallest radius at which accuracy reaches half its value at the largest
/// swept radius, interpolating linearly between sweep points.
pub fn half_max_radius(curve: &SensitivityCurve) -> Result<f64, FreqProbeError> {
    let acc: Vec<f64> = curve.points.iter().map(CurvePoint::accuracy).collect();
    let Some(&last) = acc.last() else {
        return Err(FreqProbeError::UndefinedHalfMax("empty curve".into()));
    };
    if last.is_nan() || last <= 0.0 {
        return Err(FreqProbeError::UndefinedHalfMax(format!("final accuracy is {last}")));
    }
    let target = 0.5 * last;
    let i = acc
        .iter()
        .position(|&a| a >= target)
        .ok_or_else(|| FreqProbeError::UndefinedHalfMax("curve never reaches half of its final accuracy".into()))?;
    if i == 0 {
        return Ok(curve.points[0].radius);
    }
    let (r0, r1) = (curve.points[i - 1].radius, curve.points[i].radius);
    let (a0, a1) = (acc[i - 1], acc[i]);
    Ok(r0 + (target - a0) / (a1 - a0) * (r1 - r0))
}

/// Inclusive `start:stop:step` radius grid.
pub fn parse_radii(spec: &str) -> Result<Vec<f64>, FreqProbeError> {
    let bad = |why: &str| FreqProbeError::Radii(format!("'{spec}': {why}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [start, stop, step] = parts[..] else {
        return Err(bad("expected start:stop:step"));
    };
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(&format!("'{s}' is not a number")));
    let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
    if !(step.is_finite() && step > 0.0) {
        return Err(bad("step must be positive"));
    }
    if !(start.is_finite() && stop.is_finite()) || start < 0.0 || stop < start {
        return Err(bad("need 0 <= start <= stop"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalePoint {
    pub factor: f64,
    pub curve: SensitivityCurve,
    pub half_max: Option<f64>,
}

/// Low-pass sweeps of zoomed copies of the data, one per factor. `model_for`
/// supplies the classifier used at each factor.
pub fn scale_probe<C, F>(
    mut model_for: F,
    set: LabeledImages<'_>,
    factors: &[f64],
    radii: &[f64],
    opts: SweepOptions,
) -> Result<Vec<ScalePoint>, FreqProbeError>
where
    C: Classifier,
    F: FnMut(f64, &Tensor<f64>) -> C,
{
    set.validate()?;
    if let Some(&f) = factors.iter().find(|f| !(f.is_finite() && **f >= 1.0)) {
        return Err(FreqProbeError::Factor(f));
    }
    factors
        .iter()
        .map(|&factor| {
            let zoomed = rescale_and_crop(set.images, factor)?;
            let model = model_for(factor, &zoomed);
            let view = LabeledImages { images: &zoomed, ..set };
            let mut curves = sensitivity_sweep(&model, view, radii, PassType::Low, Level::Overall, opts)?;
            let curve = curves.remove(0);
            let half_max = half_max_radius(&curve).ok();
            Ok(ScalePoint { factor, curve, half_max })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(points: &[(f64, usize)], total: usize) -> SensitivityCurve {
        SensitivityCurve {
            level: Level::Overall,
            class_id: None,
            sample_id: None,
            pass: PassType::Low,
            points: points.iter().map(|&(radius, n_correct)| CurvePoint { radius, n_correct, n_total: total }).collect(),
        }
    }

    struct Constant(usize);

    impl Classifier for Constant {
        fn classify(&self, images: &Tensor<f64>) -> Vec<usize> {
            vec![self.0; images.batch()]
        }
    }

    #[test]
    fn interpolated_half_max() {
        // Target 0.5 between (4, 0.2) and (8, 0.6): 4 + (0.3 / 0.4) * 4 = 7.
        let c = curve(&[(0.0, 0), (4.0, 2), (8.0, 6), (12.0, 10)], 10);
        assert!((half_max_radius(&c).unwrap() - 7.0).abs() < 1e-12);
    }

    #[test]
    fn step_curve_half_max_approaches_step_radius() {
        let pts: Vec<(f64, usize)> = (0..=2000).map(|i| (i as f64 * 0.01, usize::from(i >= 1000))).collect();
        let h = half_max_radius(&curve(&pts, 1)).unwrap();
        assert!((h - 10.0).abs() <= 0.01, "{h}");
    }

    #[test]
    fn flat_curve_returns_first_radius() {
        let c = curve(&[(1.5, 3), (2.5, 3), (3.5, 3)], 4);
        assert_eq!(half_max_radius(&c).unwrap(), 1.5);
    }

    #[test]
    fn zero_final_accuracy_is_undefined() {
        let c = curve(&[(1.0, 2), (2.0, 0)], 4);
        assert!(matches!(half_max_radius(&c), Err(FreqProbeError::UndefinedHalfMax(_))));
        assert!(matches!(half_max_radius(&curve(&[], 1)), Err(FreqProbeError::UndefinedHalfMax(_))));
    }

    #[test]
    fn radius_grid_syntax() {
        assert_eq!(parse_radii("0:4:1").unwrap(), vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(parse_radii("0:4.5:2").unwrap(), vec![0.0, 2.0, 4.0]);
        assert_eq!(parse_radii("0:1:0.1").unwrap().len(), 11);
        assert_eq!(parse_radii("3:3:1").unwrap(), vec![3.0]);
        for bad in ["", "1:2", "0:4:0", "4:0:1", "a:2:1", "-1:2:1"] {
            assert!(parse_radii(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn constant_classifier_gives_flat_base_rate() {
        let images = Tensor::from_fn([6, 1, 8, 8], |[n, _, y, x]| ((n + y * x) % 5) as f64 / 4.0);
        let labels = [0, 1, 1, 2, 1, 0];
        let set = LabeledImages { images: &images, labels: &labels, num_classes: 3 };
        let curves =
            sensitivity_sweep(&Constant(1), set, &[0.0, 2.0, 6.0], PassType::Low, Level::Overall, SweepOptions::default())
                .unwrap();
        assert!(curves[0].points.iter().all(|p| p.n_correct == 3 && p.n_total == 6));
        let by_class =
            sensitivity_sweep(&Constant(1), set, &[0.0, 2.0], PassType::High, Level::Class, SweepOptions::default())
                .unwrap();
        assert_eq!(by_class.len(), 3);
        assert!(by_class[1].points.iter().all(|p| p.accuracy() == 1.0));
        let by_sample =
            sensitivity_sweep(&Constant(1), set, &[0.0], PassType::Low, Level::Sample, SweepOptions::default()).unwrap();
        assert_eq!(by_sample.len(), 6);
        assert!(by_sample.iter().all(|c| c.points[0].n_total == 1));
    }

    #[test]
    fn empty_inputs_rejected() {
        let images = Tensor::<f64>::zeros([0, 1, 4, 4]);
        let set = LabeledImages { images: &images, labels: &[], num_classes: 2 };
        let err = sensitivity_sweep(&Constant(0), set, &[1.0], PassType::Low, Level::Overall, SweepOptions::default());
        assert!(matches!(err, Err(FreqProbeError::EmptyDataset)));
        let images = Tensor::<f64>::zeros([1, 1, 4, 4]);
        let set = LabeledImages { images: &images, labels: &[0], num_classes: 2 };
        for radii in [&[][..], &[2.0, 1.0], &[1.0, 1.0]] {
            let err = sensitivity_sweep(&Constant(0), set, radii, PassType::Low, Level::Overall, SweepOptions::default());
            assert!(matches!(err, Err(FreqProbeError::Radii(_))));
        }
    }
}
