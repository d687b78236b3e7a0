use crate::ndtensor::scalar::{cst, Scalar};
use crate::ndtensor::tape::{Op, Tape, Var};
use crate::ndtensor::{Tensor, TensorError};

/// `(1 - eps) * onehot(label) + eps / classes`.
pub fn smoothed_target(classes: usize, label: usize, eps: f64) -> Vec<f64> {
    let off = eps / classes as f64;
    let mut t = vec![off; classes];
    t[label] = (1.0 - eps) + off;
    t
}

/// Row-wise softmax of `(N, K, 1, 1)` logits, max-shifted.
pub fn softmax_rows<T: Scalar>(logits: &Tensor<T>) -> Vec<T> {
    let k = logits.channels();
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.data().chunks(k) {
        let mx = row.iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = row.iter().map(|&v| (v - mx).exp()).collect();
        let s: T = exps.iter().copied().sum();
        out.extend(exps.into_iter().map(|e| e / s));
    }
    out
}

pub(crate) fn cross_entropy_backward<T: Scalar>(
    g: &Tensor<T>,
    shape: [usize; 4],
    targets: &[T],
    probs: &[T],
) -> Tensor<T> {
    let scale = g.data()[0] / cst((shape[0]) as f64);
    let data = probs.iter().zip(targets).map(|(&p, &t)| (p - t) * scale).collect();
    Tensor::new(shape, data).expect("logit shape")
}

fn validate(logits: [usize; 4], labels: &[usize], eps: f64) -> Result<(), TensorError> {
    let [n, k, h, w] = logits;
    if h != 1 || w != 1 {
        return Err(TensorError::shape("logit spatial extent", "1x1", format!("{h}x{w}")));
    }
    if labels.len() != n {
        return Err(TensorError::shape("label count", n, labels.len()));
    }
    if n == 0 {
        return Err(TensorError::shape("batch size", "at least 1", 0));
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(TensorError::InvalidArgument(format!("label smoothing {eps} outside [0, 1)")));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(TensorError::LabelOutOfRange { label: bad, classes: k });
    }
    Ok(())
}

impl<T: Scalar> Tape<T> {
    /// Mean label-smoothed cross-entropy over the batch.
    pub fn cross_entropy_smoothed(&mut self, logits: Var, labels: &[usize], eps: f64) -> Result<Var, TensorError> {
        let x = self.value(logits);
        validate(x.shape(), labels, eps)?;
        let k = x.channels();
        let probs = softmax_rows(x);
        let mut targets = Vec::with_capacity(probs.len());
        let mut total = T::zero();
        for (i, &label) in labels.iter().enumerate() {
            let row = &x.data()[i * k..(i + 1) * k];
            let mx = row.iter().copied().fold(T::neg_infinity(), T::max);
            let lse = mx + row.iter().map(|&v| (v - mx).exp()).sum::<T>().ln();
            for (j, t) in smoothed_target(k, label, eps).into_iter().enumerate() {
                let t = cst::<T>(t);
                total = total - t * (row[j] - lse);
                targets.push(t);
            }
        }
        let loss = Tensor::scalar(total / cst(labels.len() as f64));
        Ok(self.push(loss, Op::CrossEntropy { logits, targets, probs }, &[logits]))
    }
}
