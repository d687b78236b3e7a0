use std::sync::mpsc::{sync_channel, Receiver};
use std::sync::Arc;
use std::thread::JoinHandle;

use crate::ndtensor::Tensor;

use super::{Dataset, Normalization};

/// SplitMix64 (Steele, Lea and Flood): the state advances by
/// `0x9E3779B97F4A7C15` and each output is the mixed state
///
/// ```text
/// z = state
/// z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
/// z = (z ^ (z >> 27)) * 0x94D049BB133111EB
/// out = z ^ (z >> 31)
/// ```
///
/// with wrapping 64-bit arithmetic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
    /// Added once per epoch to the seed to derive that epoch's stream.
    pub const EPOCH_STRIDE: u64 = 0xD1B5_4A32_D192_ED03;
    /// Xored into the epoch state to derive the flip stream.
    pub const FLIP_KEY: u64 = 0x5851_F42D_4C95_7F2D;

    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Stream for one epoch: seeded with `seed + epoch * EPOCH_STRIDE`.
    pub fn for_epoch(seed: u64, epoch: u64) -> Self {
        Self::new(seed.wrapping_add(epoch.wrapping_mul(Self::EPOCH_STRIDE)))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(Self::GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Integer in `[0, bound)` as the high word of `next_u64() * bound`.
    pub fn below(&mut self, bound: usize) -> usize {
        ((self.next_u64() as u128 * bound as u128) >> 64) as usize
    }
}

/// One epoch's visiting order.
///
/// The order is a Fisher-Yates shuffle of `0..n` driven by
/// [`SplitMix64::for_epoch`]: for `i` from `n - 1` down to 1, swap `i`
/// with `below(i + 1)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatchPlan {
    pub seed: u64,
    pub batch_size: usize,
    pub epoch: usize,
    pub order: Vec<usize>,
}

impl BatchPlan {
    pub fn new(seed: u64, epoch: usize, n: usize, batch_size: usize) -> Self {
        assert!(batch_size >= 1, "batch size must be at least 1");
        let mut rng = SplitMix64::for_epoch(seed, epoch as u64);
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.below(i + 1);
            order.swap(i, j);
        }
        Self { seed, batch_size, epoch, order }
    }

    /// Dataset order, no shuffling (evaluation).
    pub fn sequential(n: usize, batch_size: usize) -> Self {
        assert!(batch_size >= 1, "batch size must be at least 1");
        Self { seed: 0, batch_size, epoch: 0, order: (0..n).collect() }
    }

    pub fn num_batches(&self) -> usize {
        self.order.len().div_ceil(self.batch_size)
    }

    /// Indices of batch `b`; the last batch may be short.
    pub fn batch(&self, b: usize) -> &[usize] {
        let start = b * self.batch_size;
        &self.order[start..(start + self.batch_size).min(self.order.len())]
    }

    /// Per-position horizontal-flip coins for this epoch.
    fn flips(&self) -> Vec<bool> {
        let mut rng = SplitMix64::for_epoch(self.seed, self.epoch as u64);
        rng.state ^= SplitMix64::FLIP_KEY;
        (0..self.order.len()).map(|_| rng.next_u64() >> 63 == 1).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub indices: Vec<usize>,
    /// Normalized images.
    pub images: Tensor<f32>,
    pub labels: Vec<usize>,
}

/// Normalized batches of one epoch, in plan order.
pub struct Batches {
    data: Arc<Dataset>,
    plan: BatchPlan,
    norm: Normalization,
    flips: Option<Vec<bool>>,
    next: usize,
}

impl Batches {
    /// `flip` mirrors a pseudo-random half of the samples left to right.
    pub fn new(data: Arc<Dataset>, plan: BatchPlan, norm: Normalization, flip: bool) -> Self {
        let flips = flip.then(|| plan.flips());
        Self { data, plan, norm, flips, next: 0 }
    }
}

fn mirror(images: &mut Tensor<f32>, sample: usize) {
    let [_, c, _, w] = images.shape();
    for ch in 0..c {
        for row in images.plane_mut(sample, ch).chunks_mut(w) {
            row.reverse();
        }
    }
}

impl Iterator for Batches {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        if self.next >= self.plan.num_batches() {
            return None;
        }
        let b = self.next;
        self.next += 1;
        let indices = self.plan.batch(b).to_vec();
        let mut raw = self.data.images.gather(&indices);
        if let Some(flips) = &self.flips {
            for k in 0..indices.len() {
                if flips[b * self.plan.batch_size + k] {
                    mirror(&mut raw, k);
                }
            }
        }
        let labels = indices.iter().map(|&i| self.data.labels[i]).collect();
        Some(Batch { images: self.norm.apply(&raw), labels, indices })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.plan.num_batches() - self.next;
        (left, Some(left))
    }
}

/// Produces batches on a worker thread, at most `depth` ahead of the
/// consumer. The sequence is the same as iterating directly.
pub struct Prefetch {
    rx: Receiver<Batch>,
    worker: Option<JoinHandle<()>>,
}

pub fn prefetch(batches: Batches, depth: usize) -> Prefetch {
    let (tx, rx) = sync_channel(depth.max(1));
    let worker = std::thread::spawn(move || {
        for b in batches {
            if tx.send(b).is_err() {
                break;
            }
        }
    });
    Prefetch { rx, worker: Some(worker) }
}

impl Iterator for Prefetch {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        match self.rx.recv() {
            Ok(b) => Some(b),
            Err(_) => {
                if let Some(w) = self.worker.take() {
                    w.join().expect("batch worker panicked");
                }
                None
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> Arc<Dataset> {
        let images = Tensor::from_fn([n, 1, 2, 3], |[i, _, y, x]| (i * 6 + y * 3 + x) as f32 / (n * 6) as f32);
        Arc::new(Dataset::new("toy", "train", images, (0..n).map(|i| i % 3).collect(), 3).unwrap())
    }

    #[test]
    fn splitmix_reference_values() {
        // First outputs for seed 0 of the published reference generator.
        let mut r = SplitMix64::new(0);
        assert_eq!(r.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(r.next_u64(), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(r.next_u64(), 0x06C4_5D18_8009_454F);
    }

    #[test]
    fn batch_sizes_and_coverage() {
        let plan = BatchPlan::new(3, 0, 10, 4);
        let sizes: Vec<usize> = (0..plan.num_batches()).map(|b| plan.batch(b).len()).collect();
        assert_eq!(sizes, vec![4, 4, 2]);
        let mut seen = plan.order.clone();
        seen.sort_unstable();
        assert_eq!(seen, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn seed_and_epoch_determine_order() {
        assert_eq!(BatchPlan::new(1, 2, 500, 7), BatchPlan::new(1, 2, 500, 7));
        assert_ne!(BatchPlan::new(1, 2, 500, 7).order, BatchPlan::new(1, 3, 500, 7).order);
        assert_ne!(BatchPlan::new(1, 2, 500, 7).order, BatchPlan::new(2, 2, 500, 7).order);
        assert!(BatchPlan::new(9, 0, 0, 3).order.is_empty());
        assert_eq!(BatchPlan::new(9, 0, 1, 3).order, vec![0]);
    }

    #[test]
    fn batches_normalize_and_follow_the_plan() {
        let data = toy(7);
        let norm = Normalization { mean: vec![0.5], std: vec![0.25] };
        let plan = BatchPlan::new(11, 1, 7, 3);
        let batches: Vec<Batch> = Batches::new(data.clone(), plan.clone(), norm.clone(), false).collect();
        assert_eq!(batches.len(), 3);
        let flat: Vec<usize> = batches.iter().flat_map(|b| b.indices.clone()).collect();
        assert_eq!(flat, plan.order);
        for b in &batches {
            for (k, &i) in b.indices.iter().enumerate() {
                assert_eq!(b.labels[k], data.labels[i]);
                let expect = (data.images.at([i, 0, 1, 2]) - 0.5) / 0.25;
                assert_eq!(b.images.at([k, 0, 1, 2]), expect);
            }
        }
    }

    #[test]
    fn flips_mirror_rows_deterministically() {
        let data = toy(64);
        let plan = BatchPlan::new(5, 0, 64, 16);
        let id = Normalization::identity(1);
        let a: Vec<Batch> = Batches::new(data.clone(), plan.clone(), id.clone(), true).collect();
        let b: Vec<Batch> = Batches::new(data.clone(), plan.clone(), id.clone(), true).collect();
        assert_eq!(a, b);
        let mut flipped = 0;
        for batch in &a {
            for (k, &i) in batch.indices.iter().enumerate() {
                let original = data.images.plane(i, 0);
                let got = batch.images.plane(k, 0);
                if got != original {
                    assert_eq!(got, &[original[2], original[1], original[0], original[5], original[4], original[3]]);
                    flipped += 1;
                }
            }
        }
        assert!(flipped > 16 && flipped < 48, "{flipped} of 64 flipped");
    }

    #[test]
    fn prefetch_preserves_sequence() {
        let data = toy(50);
        let plan = BatchPlan::new(8, 4, 50, 6);
        let norm = Normalization::identity(1);
        let direct: Vec<Batch> = Batches::new(data.clone(), plan.clone(), norm.clone(), true).collect();
        for depth in [1, 2, 16] {
            let fetched: Vec<Batch> = prefetch(Batches::new(data.clone(), plan.clone(), norm.clone(), true), depth).collect();
            assert_eq!(fetched, direct, "depth {depth}");
        }
    }
}
