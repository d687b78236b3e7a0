//! Sinusoid images with a known spectral signature per class, and a
//! nearest-centroid classifier to probe them with.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ndtensor::Tensor;

use super::sweep::Classifier;

/// Label returned when an image is closest to the flat background.
pub const BACKGROUND: usize = usize::MAX;

pub const SINUSOID_SIDE: usize = 32;
pub const SINUSOID_FREQUENCIES: [usize; 3] = [4, 8, 12];

/// `per_class` images per frequency: `0.5 + a * cos(2 pi k x / side)` with
/// amplitude `a` drawn from `[0.2, 0.45]`. Class `i` has frequency
/// `frequencies[i]` cycles per image width, which lands on spectral bin
/// distance `k`.
pub fn sinusoid_dataset(per_class: usize, side: usize, frequencies: &[usize], seed: u64) -> (Tensor<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = per_class * frequencies.len();
    let mut images = Tensor::zeros([n, 1, side, side]);
    let mut labels = Vec::with_capacity(n);
    for (class, &k) in frequencies.iter().enumerate() {
        for _ in 0..per_class {
            let i = labels.len();
            let a = rng.random_range(0.2..=0.45);
            let row: Vec<f64> =
                (0..side).map(|x| 0.5 + a * (2.0 * PI * k as f64 * x as f64 / side as f64).cos()).collect();
            for y in 0..side {
                images.plane_mut(i, 0)[y * side..(y + 1) * side].copy_from_slice(&row);
            }
            labels.push(class);
        }
    }
    (images, labels)
}

/// Euclidean nearest class mean, plus a flat background centroid at the
/// global mean intensity that maps to [`BACKGROUND`].
#[derive(Clone, Debug)]
pub struct NearestCentroid {
    centroids: Vec<Vec<f64>>,
}

impl NearestCentroid {
    pub fn fit(images: &Tensor<f64>, labels: &[usize], num_classes: usize) -> Self {
        let dim = images.len() / images.batch().max(1);
        let mut sums = vec![vec![0.0; dim]; num_classes];
        let mut counts = vec![0usize; num_classes];
        for (i, &y) in labels.iter().enumerate() {
            let x = &images.data()[i * dim..(i + 1) * dim];
            sums[y].iter_mut().zip(x).for_each(|(s, v)| *s += v);
            counts[y] += 1;
        }
        for (s, &c) in sums.iter_mut().zip(&counts) {
            s.iter_mut().for_each(|v| *v /= c.max(1) as f64);
        }
        let mean = images.sum() / images.len() as f64;
        sums.push(vec![mean; dim]);
        Self { centroids: sums }
    }
}

impl Classifier for NearestCentroid {
    fn classify(&self, images: &Tensor<f64>) -> Vec<usize> {
        let dim = images.len() / images.batch().max(1);
        let background = self.centroids.len() - 1;
        images
            .data()
            .chunks_exact(dim)
            .map(|x| {
                let dist = |c: &Vec<f64>| c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                let best = (0..self.centroids.len())
                    .min_by(|&a, &b| dist(&self.centroids[a]).total_cmp(&dist(&self.centroids[b])))
                    .expect("at least one centroid");
                if best == background {
                    BACKGROUND
                } else {
                    best
                }
            })
            .collect()
    }
}
