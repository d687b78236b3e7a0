use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::ndtensor::Tensor;

use super::{Dataset, DatasetError};

/// Per-channel mean and standard deviation of a training split.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization {
    /// Population statistics over every pixel of each channel. A channel
    /// with zero spread gets unit std so normalization stays finite.
    pub fn compute(images: &Tensor<f32>) -> Self {
        let [n, c, _, _] = images.shape();
        let count = (n * images.plane_len()) as f64;
        let mut mean = vec![0.0; c];
        let mut std = vec![0.0; c];
        for ch in 0..c {
            let planes = || (0..n).flat_map(move |i| images.plane(i, ch).iter().map(|&v| v as f64));
            let m = planes().sum::<f64>() / count;
            let var = planes().map(|v| (v - m) * (v - m)).sum::<f64>() / count;
            mean[ch] = m;
            std[ch] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        Self { mean, std }
    }

    pub fn identity(channels: usize) -> Self {
        Self { mean: vec![0.0; channels], std: vec![1.0; channels] }
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    /// `(x - mean) / std` per channel, in single precision.
    pub fn apply(&self, images: &Tensor<f32>) -> Tensor<f32> {
        assert_eq!(images.channels(), self.channels(), "normalization channel count");
        let mean: Vec<f32> = self.mean.iter().map(|&m| m as f32).collect();
        let std: Vec<f32> = self.std.iter().map(|&s| s as f32).collect();
        let mut out = images.clone();
        let [n, c, _, _] = out.shape();
        for i in 0..n {
            for ch in 0..c {
                for v in out.plane_mut(i, ch) {
                    *v = (*v - mean[ch]) / std[ch];
                }
            }
        }
        out
    }

    /// `<dir>/<name>.<split>.stats`.
    pub fn sidecar_path(dir: &Path, name: &str, split: &str) -> PathBuf {
        dir.join(format!("{name}.{split}.stats"))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (key, values) in [("mean", &self.mean), ("std", &self.std)] {
            s.push_str(key);
            for v in values {
                write!(s, " {v}").expect("write to string");
            }
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, DatasetError> {
        let bad = |message: String| DatasetError::BadStats { path: path.to_owned(), message };
        let (mut mean, mut std) = (None, None);
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let mut words = line.split_whitespace();
            let key = words.next().expect("non-empty line");
            let values: Vec<f64> = words
                .map(|w| w.parse::<f64>().map_err(|_| bad(format!("'{w}' is not a number"))))
                .collect::<Result<_, _>>()?;
            let slot = match key {
                "mean" => &mut mean,
                "std" => &mut std,
                other => return Err(bad(format!("unknown line '{other}'"))),
            };
            if slot.replace(values).is_some() {
                return Err(bad(format!("'{key}' given twice")));
            }
        }
        let (mean, std) = (mean.ok_or_else(|| bad("missing 'mean'".into()))?, std.ok_or_else(|| bad("missing 'std'".into()))?);
        if mean.is_empty() || mean.len() != std.len() {
            return Err(bad(format!("{} means but {} stds", mean.len(), std.len())));
        }
        if let Some(s) = std.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(bad(format!("std {s} must be finite and > 0")));
        }
        Ok(Self { mean, std })
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Writes through a temporary file and a rename, so readers never see
    /// a partial sidecar.
    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        let tmp = path.with_extension(format!("stats.tmp{}", std::process::id()));
        std::fs::write(&tmp, self.to_text()).map_err(|e| DatasetError::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| DatasetError::io(path, e))
    }

    /// Reads the training split's sidecar in `dir`, computing and caching it
    /// from `train` on first use. Returns whether the sidecar was created.
    pub fn load_or_compute(dir: &Path, train: &Dataset) -> Result<(Self, bool), DatasetError> {
        let path = Self::sidecar_path(dir, &train.name, &train.split);
        if path.exists() {
            let stats = Self::load(&path)?;
            if stats.channels() != train.channels() {
                return Err(DatasetError::BadStats {
                    path,
                    message: format!("{} channels cached, dataset has {}", stats.channels(), train.channels()),
                });
            }
            return Ok((stats, false));
        }
        let stats = Self::compute(&train.images);
        stats.save(&path)?;
        Ok((stats, true))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statistics_and_application() {
        let images = Tensor::from_fn([2, 2, 2, 2], |[n, c, y, x]| (n + y * 2 + x) as f32 * 0.1 + c as f32 * 0.5);
        let stats = Normalization::compute(&images);
        let normed = stats.apply(&images);
        let again = Normalization::compute(&normed);
        for c in 0..2 {
            assert!(again.mean[c].abs() < 1e-6);
            assert!((again.std[c] - 1.0).abs() < 1e-6);
        }
        let flat = Normalization::compute(&Tensor::full([3, 1, 2, 2], 0.25));
        assert_eq!(flat.std, vec![1.0]);
    }

    #[test]
    fn sidecar_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let stats = Normalization { mean: vec![0.1307, 1.0 / 3.0], std: vec![0.3081, std::f64::consts::PI] };
        let path = Normalization::sidecar_path(dir.path(), "mnist", "train");
        assert!(path.ends_with("mnist.train.stats"));
        stats.save(&path).unwrap();
        assert_eq!(Normalization::load(&path).unwrap(), stats);
        assert!(std::fs::read_to_string(&path).unwrap().starts_with("mean 0.1307 "));
    }

    #[test]
    fn malformed_sidecars() {
        let p = Path::new("x.stats");
        for text in ["mean 1\n", "mean 1 2\nstd 1\n", "mean a\nstd 1\n", "mean 1\nstd 0\n", "mean 1\nmean 1\nstd 1\n", "avg 1\n"] {
            assert!(matches!(Normalization::parse(text, p), Err(DatasetError::BadStats { .. })), "{text:?}");
        }
    }

    #[test]
    fn cached_statistics_are_reused() {
        let dir = tempfile::tempdir().unwrap();
        let images = Tensor::from_fn([4, 1, 3, 3], |[n, _, y, x]| ((n * 9 + y * 3 + x) % 7) as f32 / 7.0);
        let train = Dataset::new("toy", "train", images, vec![0, 1, 0, 1], 2).unwrap();
        let (first, created) = Normalization::load_or_compute(dir.path(), &train).unwrap();
        assert!(created);
        let (second, created) = Normalization::load_or_compute(dir.path(), &train).unwrap();
        assert!(!created);
        assert_eq!(first, second);
    }
}
