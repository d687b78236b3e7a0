//! Central finite-difference gradient checks in double precision: one
//! suite over every tape operation and a slice-wise check of whole
//! networks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::gssdnet::{kernel_bank, operator_split, Arch, DerivativeOrders, Network, NetworkConfig};
use crate::ndtensor::{Tape, Tensor, Var};
use crate::scalespace::{gaussian_taps, Padding};

/// Five-point stencil step for single coordinates; its O(h^4) truncation
/// and eps/h rounding error both sit far below [`TOLERANCE`].
pub const STEP: f64 = 1e-4;
pub const TOLERANCE: f64 = 1e-4;

/// Steps along a parameter slice in the whole-network checks, tried in
/// order. The directional derivative is much larger than a single
/// coordinate, so even the smallest keeps rounding noise near 1e-6
/// relative.
pub const SLICE_STEPS: [f64; 3] = [1e-6, 1e-7, 1e-8];
pub const SLICE_LEN: usize = 64;

pub fn five_point(step: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    (8.0 * (f(step) - f(-step)) - (f(2.0 * step) - f(-2.0 * step))) / (12.0 * step)
}

/// `|a - n| / (max(|a|, |n|) + 1e-8)`; the floor keeps gradients that are
/// zero on both sides from dividing by zero.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs().max(numeric.abs()) + 1e-8)
}

/// Worst comparison of one check.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub label: String,
    pub checked: usize,
    pub worst: f64,
    /// Where the worst error occurred.
    pub at: String,
    pub analytic: f64,
    pub numeric: f64,
}

impl CheckReport {
    fn new(label: &str) -> Self {
        Self { label: label.to_owned(), checked: 0, worst: 0.0, at: String::new(), analytic: 0.0, numeric: 0.0 }
    }

    fn record(&mut self, at: impl FnOnce() -> String, analytic: f64, numeric: f64) {
        let err = relative_error(analytic, numeric);
        self.checked += 1;
        if err >= self.worst {
            self.worst = err;
            self.at = at();
            self.analytic = analytic;
            self.numeric = numeric;
        }
    }

    pub fn passed(&self) -> bool {
        self.checked > 0 && self.worst < TOLERANCE
    }
}

impl std::fmt::Display for CheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: {} checks, worst relative error {:e} at {} (analytic {}, numeric {})",
            self.label, self.checked, self.worst, self.at, self.analytic, self.numeric
        )
    }
}

pub fn random_tensor(shape: [usize; 4], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

/// Every element of small tensors, a random sample otherwise.
fn sample_positions(len: usize, budget: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if len <= budget {
        (0..len).collect()
    } else {
        (0..budget).map(|_| rng.random_range(0..len)).collect()
    }
}

/// Scalar reduction through a fixed random projection, so every output
/// element carries a distinct weight.
fn project(tape: &mut Tape<f64>, out: Var, seed: u64) -> Var {
    let shape = tape.value(out).shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = tape.constant(random_tensor(shape, &mut rng));
    let prod = tape.mul(out, w).expect("projection has the output's shape");
    tape.sum(prod)
}

/// Compares d(projection of `build`)/d(input) for every input tensor.
pub fn check_op(label: &str, inputs: &[Tensor<f64>], build: impl Fn(&mut Tape<f64>, &[Var]) -> Var) -> CheckReport {
    let eval = |values: &[Tensor<f64>]| -> (f64, Vec<Option<Tensor<f64>>>) {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|v| tape.leaf(v.clone(), true)).collect();
        let out = build(&mut tape, &vars);
        let loss = project(&mut tape, out, 99);
        let value = tape.value(loss).data()[0];
        tape.backward(loss).expect("scalar loss");
        (value, vars.iter().map(|&v| tape.grad(v).cloned()).collect())
    };
    let (_, grads) = eval(inputs);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut report = CheckReport::new(label);
    for (i, input) in inputs.iter().enumerate() {
        let grad = grads[i].clone().unwrap_or_else(|| Tensor::zeros(input.shape()));
        for pos in sample_positions(input.len(), 40, &mut rng) {
            let numeric = five_point(STEP, |d| {
                let mut shifted = inputs.to_vec();
                shifted[i].data_mut()[pos] += d;
                eval(&shifted).0
            });
            report.record(|| format!("input {i} element {pos}"), grad.data()[pos], numeric);
        }
    }
    report
}

/// One check per layer type, on random double-precision inputs.
pub fn layer_suite(seed: u64) -> Vec<CheckReport> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let x = random_tensor([2, 3, 7, 6], &mut r);
    let w = random_tensor([4, 3, 3, 3], &mut r);
    for (stride, padding) in [(1, 1), (2, 1), (2, 0), (1, 2)] {
        out.push(check_op(&format!("conv2d stride {stride} padding {padding}"), &[x.clone(), w.clone()], |t, v| {
            t.conv2d(v[0], v[1], stride, padding, 1).unwrap()
        }));
    }

    let x = random_tensor([2, 4, 6, 6], &mut r);
    let grouped = random_tensor([6, 2, 3, 3], &mut r);
    out.push(check_op("grouped conv2d", &[x.clone(), grouped], |t, v| t.conv2d(v[0], v[1], 1, 1, 2).unwrap()));
    let dw = random_tensor([4, 1, 3, 3], &mut r);
    for stride in [1, 2] {
        out.push(check_op(&format!("depthwise conv stride {stride}"), &[x.clone(), dw.clone()], |t, v| {
            t.depthwise_conv2d(v[0], v[1], stride, 1).unwrap()
        }));
    }

    let x = random_tensor([3, 5, 4, 4], &mut r);
    let w = random_tensor([6, 5, 1, 1], &mut r);
    let b = random_tensor([1, 6, 1, 1], &mut r);
    out.push(check_op("pointwise conv + bias", &[x, w, b], |t, v| {
        let y = t.pointwise_conv(v[0], v[1]).unwrap();
        t.add_bias(y, v[2]).unwrap()
    }));

    // Every entry at least 0.1 from zero, so the stencil never crosses the kink.
    let x = Tensor::from_fn([2, 3, 4, 4], |_| {
        let v: f64 = r.random_range(0.1..1.0);
        if r.random_bool(0.5) {
            v
        } else {
            -v
        }
    });
    out.push(check_op("relu", &[x], |t, v| t.relu(v[0])));

    let x = random_tensor([4, 3, 5, 5], &mut r);
    let gamma = random_tensor([1, 3, 1, 1], &mut r);
    let beta = random_tensor([1, 3, 1, 1], &mut r);
    let (mean, var) = (vec![0.1, -0.2, 0.05], vec![0.9, 1.3, 0.7]);
    for training in [true, false] {
        let label = if training { "batchnorm (batch statistics)" } else { "batchnorm (running statistics)" };
        out.push(check_op(label, &[x.clone(), gamma.clone(), beta.clone()], |t, v| {
            t.batchnorm_with(v[0], v[1], v[2], &mean, &var, training).unwrap().0
        }));
    }

    let x = random_tensor([2, 6, 5, 5], &mut r);
    out.push(check_op("global average pool", std::slice::from_ref(&x), |t, v| t.global_avg_pool(v[0]).unwrap()));
    out.push(check_op("subsample", std::slice::from_ref(&x), |t, v| t.subsample(v[0], 2).unwrap()));
    out.push(check_op("channel slice + concat", std::slice::from_ref(&x), |t, v| {
        let a = t.slice_channels(v[0], 0, 2).unwrap();
        let b = t.slice_channels(v[0], 3, 3).unwrap();
        t.concat_channels(b, a).unwrap()
    }));
    let y = random_tensor([2, 6, 5, 5], &mut r);
    out.push(check_op("mul + sum", &[x, y], |t, v| {
        let p = t.mul(v[0], v[1]).unwrap();
        t.sum(p)
    }));

    let x = random_tensor([2, 6, 9, 8], &mut r);
    let taps = gaussian_taps(0.8, 4);
    for padding in [Padding::Replicate, Padding::Zero, Padding::Symmetric] {
        for stride in [1, 2] {
            out.push(check_op(&format!("blur subsample {padding:?} stride {stride}"), std::slice::from_ref(&x), |t, v| {
                t.blur_subsample(v[0], &taps, stride, padding).unwrap()
            }));
        }
    }
    let bank = kernel_bank::<f64>(6, DerivativeOrders::Second, 1.0).expect("valid sigma");
    for stride in [1, 2] {
        out.push(check_op(&format!("fixed depthwise stride {stride}"), std::slice::from_ref(&x), |t, v| {
            t.fixed_depthwise(v[0], &bank, stride).unwrap()
        }));
    }

    let logits = random_tensor([5, 7, 1, 1], &mut r);
    let labels = [0, 3, 6, 2, 3];
    out.push(check_op("smoothed cross entropy", &[logits], |t, v| t.cross_entropy_smoothed(v[0], &labels, 0.1).unwrap()));

    // Gradient must reach the input through both the filtered and the
    // pass-through halves.
    let x = random_tensor([2, 8, 8, 8], &mut r);
    let w = random_tensor([6, 8, 1, 1], &mut r);
    let bank = kernel_bank::<f64>(4, DerivativeOrders::Second, 1.0).expect("valid sigma");
    for stride in [1, 2] {
        out.push(check_op(&format!("gssd block stride {stride}"), &[x.clone(), w.clone()], |t, v| {
            let mixed = operator_split(t, v[0], &bank, stride).unwrap();
            t.pointwise_conv(mixed, v[1]).unwrap()
        }));
    }
    out
}

/// Loss plus the on/off pattern of every ReLU output in the network.
fn loss_and_pattern(net: &Network<f64>, images: &Tensor<f64>, labels: &[usize], training: bool) -> (f64, Vec<bool>) {
    let (loss, _, pass, tape) = net.loss_and_gradients(images, labels, 0.1, training).expect("valid batch");
    let mut relus = vec![pass.stem];
    if net.config().arch == Arch::Vanilla {
        relus.extend(&pass.mixed);
    }
    relus.extend(&pass.blocks);
    let pattern = relus.iter().flat_map(|&v| tape.value(v).data().iter().map(|&x| x > 0.0)).collect();
    (loss, pattern)
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkCheck {
    pub report: CheckReport,
    /// Directions discarded because the stencil crossed a ReLU kink.
    pub redrawn: usize,
    /// The redraw cap was hit before every tensor was checked.
    pub exhausted: bool,
}

impl NetworkCheck {
    pub fn passed(&self) -> bool {
        !self.exhausted && self.report.passed()
    }
}

/// Directional finite differences of the Mini network's loss along `+-1`
/// directions supported on random slices of each learnable tensor,
/// against the tape gradient projected on the same direction.
///
/// Signs follow the analytic gradient, so the projection is the slice's L1
/// norm and cannot cancel below rounding noise; a component with a wrong
/// sign or magnitude still shows up as a mismatch.
///
/// The loss is only piecewise smooth. A stencil whose points do not all
/// share the base ReLU pattern straddles a kink, where no derivative
/// exists; such a direction is redrawn. Redraws are capped so a check that
/// keeps hitting kinks fails instead of passing vacuously.
pub fn check_network(arch: Arch, training: bool, per_tensor: usize, seed: u64) -> NetworkCheck {
    let config = NetworkConfig::mini(arch, 10, 1);
    let mut net = Network::<f64>::new(&config, seed).expect("mini config is valid");
    let mut r = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let images = Tensor::from_fn([4, 1, 28, 28], |_| r.random_range(-1.0..1.0));
    let labels = [1, 7, 3, 9];
    if !training {
        // Non-trivial running statistics for eval mode.
        let (_, _, pass, _) = net.loss_and_gradients(&images, &labels, 0.1, true).expect("valid batch");
        net.absorb(&pass.bn_updates);
    }
    let (_, grads, _, _) = net.loss_and_gradients(&images, &labels, 0.1, training).expect("valid batch");
    let (_, base_pattern) = loss_and_pattern(&net, &images, &labels, training);
    let mode = if training { "training" } else { "eval" };
    let mut report = CheckReport::new(&format!("{arch} mini network ({mode} mode)"));
    let mut redrawn = 0;
    for (id, grad) in net.learnable_ids().into_iter().zip(&grads) {
        let name = net.params().get(id).name.clone();
        let mut done = 0;
        while done < per_tensor {
            if redrawn > report.checked / 4 + 8 {
                return NetworkCheck { report, redrawn, exhausted: true };
            }
            let len = SLICE_LEN.min(grad.len());
            let start = r.random_range(0..=grad.len() - len);
            let direction: Vec<f64> = grad.data()[start..start + len]
                .iter()
                .map(|&g| if g > 0.0 || (g == 0.0 && r.random_bool(0.5)) { 1.0 } else { -1.0 })
                .collect();
            let original = net.params().value(id).data()[start..start + len].to_vec();
            let analytic: f64 = grad.data()[start..start + len].iter().zip(&direction).map(|(g, d)| g * d).sum();
            // A unit sitting within a step of its kink flips for any
            // direction, so shrink the step before giving up on this one.
            let mut numeric = None;
            for step in SLICE_STEPS {
                let mut smooth = true;
                let value = five_point(step, |t| {
                    let slot = &mut net.params_mut().value_mut(id).data_mut()[start..start + len];
                    for ((w, &o), &d) in slot.iter_mut().zip(&original).zip(&direction) {
                        *w = o + t * d;
                    }
                    let (loss, pattern) = loss_and_pattern(&net, &images, &labels, training);
                    smooth &= pattern == base_pattern;
                    loss
                });
                if smooth {
                    numeric = Some(value);
                    break;
                }
            }
            net.params_mut().value_mut(id).data_mut()[start..start + len].copy_from_slice(&original);
            let Some(numeric) = numeric else {
                redrawn += 1;
                continue;
            };
            report.record(|| format!("{name}[{start}..{}]", start + len), analytic, numeric);
            done += 1;
        }
    }
    NetworkCheck { report, redrawn, exhausted: false }
}
