use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::ndtensor::checkpoint::{CheckpointError, Entry};
use crate::ndtensor::ops::norm::BatchStats;
use crate::ndtensor::{ParamId, ParamKind, ParamStore, Scalar, Tape, Tensor, Var};
use crate::scalespace::{GaussianKernel, Padding};

use super::config::{Arch, BlockSpec, NetworkConfig};
use super::operators::kernel_bank;
use super::NetError;

/// Entries under this prefix carry metadata rather than parameters.
pub const META_NAMESPACE: &str = "meta.";

/// Checkpoint entry name prefix carrying the network configuration; the
/// rest of the name is the key-value dump and the entry has no payload.
pub const META_PREFIX: &str = "meta.config:";

#[derive(Clone, Copy, Debug)]
struct BnIds {
    gamma: ParamId,
    beta: ParamId,
    mean: ParamId,
    var: ParamId,
}

#[derive(Clone, Debug)]
enum Stem {
    Gaussian { taps: ParamId, pw: ParamId, bn: BnIds },
    Conv { weight: ParamId, bn: BnIds },
}

#[derive(Clone, Debug)]
enum Block {
    Gaussian { spec: BlockSpec, kernels: ParamId, pw: ParamId, bn: BnIds },
    Vanilla { spec: BlockSpec, dw: ParamId, dw_bn: BnIds, pw: ParamId, pw_bn: BnIds },
}

/// Batch statistics produced by a training-mode forward pass, to be folded
/// into the running buffers once the step is accepted.
#[derive(Clone, Debug)]
pub struct BnUpdate<T> {
    pub mean: ParamId,
    pub var: ParamId,
    pub stats: BatchStats<T>,
}

/// Handles into the tape for one forward pass.
pub struct ForwardPass<T> {
    pub logits: Var,
    pub stem: Var,
    /// Pointwise input of every block (operator bank output or depthwise
    /// branch).
    pub mixed: Vec<Var>,
    pub blocks: Vec<Var>,
    pub bn_updates: Vec<BnUpdate<T>>,
    bound: Vec<Option<Var>>,
}

impl<T> ForwardPass<T> {
    /// Tape variable carrying learnable parameter `id`.
    pub fn param_var(&self, id: ParamId) -> Option<Var> {
        self.bound[id.0]
    }
}

/// GSSDNet or its depthwise-separable twin: stem, block stack, global
/// average pooling and a linear classifier.
#[derive(Clone, Debug)]
pub struct Network<T: Scalar> {
    config: NetworkConfig,
    params: ParamStore<T>,
    stem: Stem,
    blocks: Vec<Block>,
    head_weight: ParamId,
    head_bias: ParamId,
}

struct Builder<T: Scalar> {
    store: ParamStore<T>,
    rng: ChaCha8Rng,
}

impl<T: Scalar> Builder<T> {
    fn he(&mut self, name: String, shape: [usize; 4], fan_in: usize) -> ParamId {
        let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
        let value = Tensor::from_fn(shape, |_| T::from_f64_lossy(normal.sample(&mut self.rng)));
        self.store.add(name, value, ParamKind::Learnable { decay_exempt: false })
    }

    fn bn(&mut self, prefix: &str, c: usize) -> BnIds {
        let exempt = ParamKind::Learnable { decay_exempt: true };
        let shape = [1, c, 1, 1];
        BnIds {
            gamma: self.store.add(format!("{prefix}.gamma"), Tensor::full(shape, T::one()), exempt),
            beta: self.store.add(format!("{prefix}.beta"), Tensor::zeros(shape), exempt),
            mean: self.store.add(format!("{prefix}.running_mean"), Tensor::zeros(shape), ParamKind::Buffer),
            var: self.store.add(format!("{prefix}.running_var"), Tensor::full(shape, T::one()), ParamKind::Buffer),
        }
    }
}

impl<T: Scalar> Network<T> {
    /// Builds and He-initializes the network; equal seeds give equal weights.
    pub fn new(config: &NetworkConfig, seed: u64) -> Result<Self, NetError> {
        config.validate()?;
        let mut b = Builder { store: ParamStore::new(), rng: ChaCha8Rng::seed_from_u64(seed) };
        let cin = config.input_channels;
        let stem_w = config.stem_width;
        let stem = match config.arch {
            Arch::GssdNet => {
                let taps = GaussianKernel::new(config.sigma_stem, None)?.taps().to_vec();
                let taps = Tensor::new([1, 1, 1, taps.len()], taps.into_iter().map(T::from_f64_lossy).collect())
                    .expect("tap extents");
                let taps = b.store.add("stem.blur.taps", taps, ParamKind::Fixed);
                let pw = b.he("stem.pw.weight".into(), [stem_w, cin, 1, 1], cin);
                Stem::Gaussian { taps, pw, bn: b.bn("stem.bn", stem_w) }
            }
            Arch::Vanilla => {
                let weight = b.he("stem.conv.weight".into(), [stem_w, cin, 3, 3], cin * 9);
                Stem::Conv { weight, bn: b.bn("stem.bn", stem_w) }
            }
        };
        let mut blocks = Vec::with_capacity(config.blocks.len());
        for (i, &spec) in config.blocks.iter().enumerate() {
            let p = format!("blocks.{i}");
            let (c, o) = (spec.in_channels, spec.out_channels);
            blocks.push(match config.arch {
                Arch::GssdNet => {
                    let bank = kernel_bank::<T>(c / 2, config.derivative_orders, config.sigma_block)?;
                    let kernels = b.store.add(format!("{p}.operators"), bank, ParamKind::Fixed);
                    let pw = b.he(format!("{p}.pw.weight"), [o, c, 1, 1], c);
                    Block::Gaussian { spec, kernels, pw, bn: b.bn(&format!("{p}.bn"), o) }
                }
                Arch::Vanilla => {
                    let dw = b.he(format!("{p}.dw.weight"), [c, 1, 3, 3], 9);
                    let dw_bn = b.bn(&format!("{p}.dw_bn"), c);
                    let pw = b.he(format!("{p}.pw.weight"), [o, c, 1, 1], c);
                    Block::Vanilla { spec, dw, dw_bn, pw, pw_bn: b.bn(&format!("{p}.pw_bn"), o) }
                }
            });
        }
        let (k, c) = (config.num_classes, config.final_width());
        let head_weight = b.he("head.weight".into(), [k, c, 1, 1], c);
        let head_bias =
            b.store.add("head.bias", Tensor::zeros([1, k, 1, 1]), ParamKind::Learnable { decay_exempt: true });
        Ok(Self { config: config.clone(), params: b.store, stem, blocks, head_weight, head_bias })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn learnable_ids(&self) -> Vec<ParamId> {
        self.params.learnable().map(|(id, _)| id).collect()
    }

    /// Number of trainable scalars; fixed operators and running statistics
    /// are excluded.
    pub fn parameter_count(&self) -> usize {
        self.params.learnable_count()
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            config: self.config.clone(),
            params: self.params.cast(),
            stem: self.stem.clone(),
            blocks: self.blocks.clone(),
            head_weight: self.head_weight,
            head_bias: self.head_bias,
        }
    }

    fn bn(
        &self,
        tape: &mut Tape<T>,
        x: Var,
        ids: BnIds,
        bound: &[Option<Var>],
        training: bool,
        updates: &mut Vec<BnUpdate<T>>,
    ) -> Result<Var, NetError> {
        let gamma = bound[ids.gamma.0].expect("bound");
        let beta = bound[ids.beta.0].expect("bound");
        let (y, stats) = tape.batchnorm_with(
            x,
            gamma,
            beta,
            self.params.value(ids.mean).data(),
            self.params.value(ids.var).data(),
            training,
        )?;
        if let Some(stats) = stats {
            updates.push(BnUpdate { mean: ids.mean, var: ids.var, stats });
        }
        Ok(y)
    }

    /// Records the network on `tape`. `input` must already be normalized.
    /// Training mode normalizes with batch statistics and reports them in
    /// [`ForwardPass::bn_updates`]; the stored buffers are not touched.
    pub fn forward(&self, tape: &mut Tape<T>, input: Var, training: bool) -> Result<ForwardPass<T>, NetError> {
        let [_, c, _, _] = tape.value(input).shape();
        if c != self.config.input_channels {
            return Err(NetError::Tensor(crate::ndtensor::TensorError::shape(
                "network input channels",
                self.config.input_channels,
                c,
            )));
        }
        let mut bound = vec![None; self.params.len()];
        for (id, p) in self.params.learnable() {
            bound[id.0] = Some(tape.leaf(p.value.clone(), true));
        }
        let var = |id: ParamId| bound[id.0].expect("learnable parameter bound");
        let mut updates = Vec::new();

        let stem = match &self.stem {
            Stem::Gaussian { taps, pw, bn } => {
                let blurred = tape.blur_subsample(input, self.params.value(*taps).data(), 2, Padding::Replicate)?;
                let mixed = tape.pointwise_conv(blurred, var(*pw))?;
                let normed = self.bn(tape, mixed, *bn, &bound, training, &mut updates)?;
                tape.relu(normed)
            }
            Stem::Conv { weight, bn } => {
                let conv = tape.conv2d(input, var(*weight), 2, 1, 1)?;
                let normed = self.bn(tape, conv, *bn, &bound, training, &mut updates)?;
                tape.relu(normed)
            }
        };

        let mut x = stem;
        let mut mixed_vars = Vec::with_capacity(self.blocks.len());
        let mut block_vars = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let (mixed, out) = match block {
                Block::Gaussian { spec, kernels, pw, bn } => {
                    let mixed = operator_split(tape, x, self.params.value(*kernels), spec.stride)?;
                    let y = tape.pointwise_conv(mixed, var(*pw))?;
                    let y = self.bn(tape, y, *bn, &bound, training, &mut updates)?;
                    (mixed, tape.relu(y))
                }
                Block::Vanilla { spec, dw, dw_bn, pw, pw_bn } => {
                    let d = tape.depthwise_conv2d(x, var(*dw), spec.stride, 1)?;
                    let d = self.bn(tape, d, *dw_bn, &bound, training, &mut updates)?;
                    let mixed = tape.relu(d);
                    let y = tape.pointwise_conv(mixed, var(*pw))?;
                    let y = self.bn(tape, y, *pw_bn, &bound, training, &mut updates)?;
                    (mixed, tape.relu(y))
                }
            };
            mixed_vars.push(mixed);
            block_vars.push(out);
            x = out;
        }

        let pooled = tape.global_avg_pool(x)?;
        let logits = tape.pointwise_conv(pooled, var(self.head_weight))?;
        let logits = tape.add_bias(logits, var(self.head_bias))?;
        Ok(ForwardPass { logits, stem, mixed: mixed_vars, blocks: block_vars, bn_updates: updates, bound })
    }

    /// Eval-mode logits `(N, K, 1, 1)` for normalized inputs.
    pub fn logits(&self, images: &Tensor<T>) -> Result<Tensor<T>, NetError> {
        let mut tape = Tape::new();
        let input = tape.constant(images.clone());
        let pass = self.forward(&mut tape, input, false)?;
        Ok(tape.value(pass.logits).clone())
    }

    pub fn predict(&self, images: &Tensor<T>) -> Result<Vec<usize>, NetError> {
        Ok(argmax_rows(&self.logits(images)?))
    }

    /// Mean smoothed cross-entropy and its gradient for every learnable
    /// parameter, in [`Network::learnable_ids`] order.
    pub fn loss_and_gradients(
        &self,
        images: &Tensor<T>,
        labels: &[usize],
        label_smoothing: f64,
        training: bool,
    ) -> Result<LossAndGradients<T>, NetError> {
        let mut tape = Tape::new();
        let input = tape.constant(images.clone());
        let pass = self.forward(&mut tape, input, training)?;
        let loss = tape.cross_entropy_smoothed(pass.logits, labels, label_smoothing)?;
        tape.backward(loss)?;
        let grads = self
            .learnable_ids()
            .into_iter()
            .map(|id| {
                let v = pass.param_var(id).expect("bound");
                tape.grad(v).cloned().unwrap_or_else(|| Tensor::zeros(self.params.value(id).shape()))
            })
            .collect();
        let value = tape.value(loss).data()[0].as_f64();
        Ok((value, grads, pass, tape))
    }

    /// Folds training-mode batch statistics into the running buffers.
    pub fn absorb(&mut self, updates: &[BnUpdate<T>]) {
        let momentum = T::from_f64_lossy(crate::ndtensor::BN_MOMENTUM);
        for u in updates {
            let mut mean = self.params.value(u.mean).data().to_vec();
            let mut var = self.params.value(u.var).data().to_vec();
            crate::ndtensor::ops::norm::absorb_into(&mut mean, &mut var, &u.stats, momentum);
            self.params.value_mut(u.mean).data_mut().copy_from_slice(&mean);
            self.params.value_mut(u.var).data_mut().copy_from_slice(&var);
        }
    }

    /// Metadata entry followed by every tensor in canonical order.
    pub fn to_entries(&self) -> Vec<Entry> {
        let mut entries =
            vec![Entry { name: format!("{META_PREFIX}{}", self.config.to_kv()), extents: [0; 4], data: Vec::new() }];
        entries.extend(self.params.to_entries());
        entries
    }

    /// Rebuilds a network from its configuration entry and tensors; other
    /// `meta.` entries are left to the caller.
    pub fn from_entries(entries: &[Entry]) -> Result<Self, NetError> {
        let config = config_from_entries(entries)?;
        let mut net = Self::new(&config, 0)?;
        net.params.load_entries(entries)?;
        let tensors = entries.iter().filter(|e| !e.name.starts_with(META_NAMESPACE)).count();
        if tensors != net.params.len() {
            return Err(NetError::Checkpoint(CheckpointError::Invalid(format!(
                "checkpoint has {tensors} tensors, network expects {}",
                net.params.len()
            ))));
        }
        Ok(net)
    }
}

/// Loss, gradients in learnable order, and the pass and tape they came from.
pub type LossAndGradients<T> = (f64, Vec<Tensor<T>>, ForwardPass<T>, Tape<T>);

pub fn config_from_entries(entries: &[Entry]) -> Result<NetworkConfig, NetError> {
    let meta = entries.iter().find_map(|e| e.name.strip_prefix(META_PREFIX)).ok_or(NetError::MissingMetadata)?;
    Ok(NetworkConfig::parse(meta)?)
}

/// Index of the largest logit per row, first on ties.
pub fn argmax_rows<T: Scalar>(logits: &Tensor<T>) -> Vec<usize> {
    let k = logits.channels();
    logits
        .data()
        .chunks(k)
        .map(|row| row.iter().enumerate().fold(0, |best, (j, &v)| if v > row[best] { j } else { best }))
        .collect()
}

/// Half of the channels through the fixed operator bank, the other half
/// passed through (subsampled when `stride > 1`), concatenated.
pub fn operator_split<T: Scalar>(
    tape: &mut Tape<T>,
    x: Var,
    kernels: &Tensor<T>,
    stride: usize,
) -> Result<Var, NetError> {
    let c = tape.value(x).channels();
    if !c.is_multiple_of(2) {
        return Err(NetError::Config(super::ConfigError::Invalid(format!(
            "operator split needs an even channel count, got {c}"
        ))));
    }
    let half = c / 2;
    let filtered = tape.slice_channels(x, 0, half)?;
    let filtered = tape.fixed_depthwise(filtered, kernels, stride)?;
    let passed = tape.slice_channels(x, half, half)?;
    let passed = if stride == 1 { passed } else { tape.subsample(passed, stride)? };
    Ok(tape.concat_channels(filtered, passed)?)
}
