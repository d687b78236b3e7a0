use super::ops;
use super::scalar::Scalar;
use super::tensor::Tensor;
use super::TensorError;
use crate::scalespace::Padding;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

pub(crate) enum Op<T> {
    Leaf,
    Conv2d { input: Var, weight: Var, stride: usize, padding: usize, groups: usize },
    Pointwise { input: Var, weight: Var },
    AddBias { input: Var, bias: Var },
    BatchNorm { input: Var, gamma: Var, beta: Var, mean: Vec<T>, inv_std: Vec<T>, training: bool },
    Relu { input: Var },
    GlobalAvgPool { input: Var },
    Subsample { input: Var, stride: usize },
    SliceChannels { input: Var, start: usize },
    Concat { first: Var, second: Var },
    Blur { input: Var, taps: Vec<T>, stride: usize, padding: Padding },
    FixedDepthwise { input: Var, kernels: Tensor<T>, stride: usize },
    CrossEntropy { logits: Var, targets: Vec<T>, probs: Vec<T> },
    Sum { input: Var },
    Mul { lhs: Var, rhs: Var },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
    grad: Option<Tensor<T>>,
}

/// Reverse-mode gradient tape.
///
/// Every operation appends a node holding its forward value. `backward`
/// walks the nodes in reverse and accumulates into each node's `grad`, so
/// calling it twice without [`Tape::zero_grad`] sums the two passes.
pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, requires_grad, grad: None });
        Var(self.nodes.len() - 1)
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    pub(crate) fn push(&mut self, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node { value, op, requires_grad, grad: None });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn grad(&self, v: Var) -> Option<&Tensor<T>> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn take_grad(&mut self, v: Var) -> Option<Tensor<T>> {
        self.nodes[v.0].grad.take()
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    /// Populates gradients of every `requires_grad` node reachable from `loss`.
    pub fn backward(&mut self, loss: Var) -> Result<(), TensorError> {
        let root = &self.nodes[loss.0];
        if root.value.len() != 1 {
            return Err(TensorError::NonScalarRoot { shape: root.value.shape() });
        }
        if !root.requires_grad {
            return Ok(());
        }
        let mut pending: Vec<Option<Tensor<T>>> = (0..=loss.0).map(|_| None).collect();
        pending[loss.0] = Some(Tensor::full(root.value.shape(), T::one()));

        for i in (0..=loss.0).rev() {
            let Some(g) = pending[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            self.propagate(i, &g, &mut pending);
            let node = &mut self.nodes[i];
            match &mut node.grad {
                Some(acc) => {
                    for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                        *a = *a + *b;
                    }
                }
                None => node.grad = Some(g),
            }
        }
        Ok(())
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&self, i: usize, g: &Tensor<T>, pending: &mut [Option<Tensor<T>>]) {
        let node = &self.nodes[i];
        let out = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d { input, weight, stride, padding, groups } => {
                let x = self.value(*input);
                let w = self.value(*weight);
                if self.wants(*input) {
                    let gx = ops::conv::conv2d_backward_input(g, w, x.shape(), *stride, *padding, *groups);
                    accumulate(pending, *input, gx);
                }
                if self.wants(*weight) {
                    let gw = ops::conv::conv2d_backward_weight(g, x, w.shape(), *stride, *padding, *groups);
                    accumulate(pending, *weight, gw);
                }
            }
            Op::Pointwise { input, weight } => {
                let x = self.value(*input);
                let w = self.value(*weight);
                if self.wants(*input) {
                    accumulate(pending, *input, ops::conv::pointwise_backward_input(g, w));
                }
                if self.wants(*weight) {
                    accumulate(pending, *weight, ops::conv::pointwise_backward_weight(g, x));
                }
            }
            Op::AddBias { input, bias } => {
                if self.wants(*input) {
                    accumulate(pending, *input, g.clone());
                }
                if self.wants(*bias) {
                    let sums = ops::pool::channel_sums(g).reshape(self.value(*bias).shape()).expect("bias length checked");
                    accumulate(pending, *bias, sums);
                }
            }
            Op::BatchNorm { input, gamma, beta, mean, inv_std, training } => {
                let grads = ops::norm::batchnorm_backward(
                    g,
                    self.value(*input),
                    self.value(*gamma),
                    mean,
                    inv_std,
                    *training,
                );
                if self.wants(*input) {
                    accumulate(pending, *input, grads.input);
                }
                if self.wants(*gamma) {
                    accumulate(pending, *gamma, grads.gamma);
                }
                if self.wants(*beta) {
                    accumulate(pending, *beta, grads.beta);
                }
            }
            Op::Relu { input } => {
                if self.wants(*input) {
                    accumulate(pending, *input, ops::activation::relu_backward(g, out));
                }
            }
            Op::GlobalAvgPool { input } => {
                if self.wants(*input) {
                    let shape = self.value(*input).shape();
                    accumulate(pending, *input, ops::pool::global_avg_pool_backward(g, shape));
                }
            }
            Op::Subsample { input, stride } => {
                if self.wants(*input) {
                    let shape = self.value(*input).shape();
                    accumulate(pending, *input, ops::shape::subsample_backward(g, shape, *stride));
                }
            }
            Op::SliceChannels { input, start } => {
                if self.wants(*input) {
                    let shape = self.value(*input).shape();
                    accumulate(pending, *input, ops::shape::slice_channels_backward(g, shape, *start));
                }
            }
            Op::Concat { first, second } => {
                let c1 = self.value(*first).channels();
                let (ga, gb) = ops::shape::concat_backward(g, c1);
                if self.wants(*first) {
                    accumulate(pending, *first, ga);
                }
                if self.wants(*second) {
                    accumulate(pending, *second, gb);
                }
            }
            Op::Blur { input, taps, stride, padding } => {
                if self.wants(*input) {
                    let shape = self.value(*input).shape();
                    accumulate(pending, *input, ops::shape::blur_backward(g, shape, taps, *stride, *padding));
                }
            }
            Op::FixedDepthwise { input, kernels, stride } => {
                if self.wants(*input) {
                    let shape = self.value(*input).shape();
                    accumulate(pending, *input, ops::fixed::fixed_depthwise_backward(g, shape, kernels, *stride));
                }
            }
            Op::CrossEntropy { logits, targets, probs } => {
                if self.wants(*logits) {
                    let shape = self.value(*logits).shape();
                    accumulate(pending, *logits, ops::loss::cross_entropy_backward(g, shape, targets, probs));
                }
            }
            Op::Sum { input } => {
                if self.wants(*input) {
                    let shape = self.value(*input).shape();
                    accumulate(pending, *input, Tensor::full(shape, g.data()[0]));
                }
            }
            Op::Mul { lhs, rhs } => {
                let a = self.value(*lhs);
                let b = self.value(*rhs);
                if self.wants(*lhs) {
                    accumulate(pending, *lhs, ops::elementwise::hadamard(g, b));
                }
                if self.wants(*rhs) {
                    accumulate(pending, *rhs, ops::elementwise::hadamard(g, a));
                }
            }
        }
    }
}

fn accumulate<T: Scalar>(pending: &mut [Option<Tensor<T>>], v: Var, g: Tensor<T>) {
    match &mut pending[v.0] {
        Some(acc) => {
            for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                *a = *a + *b;
            }
        }
        slot @ None => *slot = Some(g),
    }
}
