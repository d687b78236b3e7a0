use crate::ndtensor::scalar::{cst, Scalar};
use crate::ndtensor::tape::{Op, Tape, Var};
use crate::ndtensor::{Tensor, TensorError};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

/// Per-channel statistics of one training batch.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStats<T> {
    pub mean: Vec<T>,
    /// Bessel-corrected variance, the value folded into running statistics.
    pub var: Vec<T>,
}

/// Running mean/variance used in evaluation mode.
#[derive(Clone, Debug, PartialEq)]
pub struct RunningStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
    pub momentum: T,
}

impl<T: Scalar> RunningStats<T> {
    pub fn new(channels: usize) -> Self {
        Self { mean: vec![T::zero(); channels], var: vec![T::one(); channels], momentum: cst(BN_MOMENTUM) }
    }

    /// `running <- momentum * running + (1 - momentum) * batch`.
    pub fn absorb(&mut self, batch: &BatchStats<T>) {
        absorb_into(&mut self.mean, &mut self.var, batch, self.momentum);
    }
}

pub fn absorb_into<T: Scalar>(mean: &mut [T], var: &mut [T], batch: &BatchStats<T>, momentum: T) {
    let keep = momentum;
    let take = T::one() - momentum;
    for (r, b) in mean.iter_mut().zip(&batch.mean) {
        *r = keep * *r + take * *b;
    }
    for (r, b) in var.iter_mut().zip(&batch.var) {
        *r = keep * *r + take * *b;
    }
}

pub(crate) struct BnGrads<T> {
    pub input: Tensor<T>,
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
}

pub(crate) fn batchnorm_backward<T: Scalar>(
    g: &Tensor<T>,
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    mean: &[T],
    inv_std: &[T],
    training: bool,
) -> BnGrads<T> {
    let [n, c, _, _] = x.shape();
    let m = cst::<T>((n * x.plane_len()) as f64);
    let mut gin = Tensor::zeros(x.shape());
    let mut ggamma = Tensor::zeros(gamma.shape());
    let mut gbeta = Tensor::zeros(gamma.shape());
    for ch in 0..c {
        let (mu, is) = (mean[ch], inv_std[ch]);
        let mut sum_g = T::zero();
        let mut sum_gx = T::zero();
        for i in 0..n {
            for (&gv, &xv) in g.plane(i, ch).iter().zip(x.plane(i, ch)) {
                sum_g = sum_g + gv;
                sum_gx = sum_gx + gv * (xv - mu) * is;
            }
        }
        ggamma.data_mut()[ch] = sum_gx;
        gbeta.data_mut()[ch] = sum_g;
        let gm = gamma.data()[ch];
        for i in 0..n {
            let gp = g.plane(i, ch);
            let xp = x.plane(i, ch);
            let out = gin.plane_mut(i, ch);
            if training {
                let scale = gm * is / m;
                for ((o, &gv), &xv) in out.iter_mut().zip(gp).zip(xp) {
                    let xhat = (xv - mu) * is;
                    *o = scale * (m * gv - sum_g - xhat * sum_gx);
                }
            } else {
                let scale = gm * is;
                for (o, &gv) in out.iter_mut().zip(gp) {
                    *o = scale * gv;
                }
            }
        }
    }
    BnGrads { input: gin, gamma: ggamma, beta: gbeta }
}

impl<T: Scalar> Tape<T> {
    /// Batch normalization against explicit running statistics.
    ///
    /// In training mode the batch statistics normalize the input and are
    /// returned so the caller can fold them into its running state.
    pub fn batchnorm_with(
        &mut self,
        input: Var,
        gamma: Var,
        beta: Var,
        running_mean: &[T],
        running_var: &[T],
        training: bool,
    ) -> Result<(Var, Option<BatchStats<T>>), TensorError> {
        let x = self.value(input);
        let [n, c, _, _] = x.shape();
        if n == 0 {
            return Err(TensorError::shape("batch size", "at least 1", 0));
        }
        for (name, len) in [
            ("gamma length", self.value(gamma).len()),
            ("beta length", self.value(beta).len()),
            ("running mean length", running_mean.len()),
            ("running var length", running_var.len()),
        ] {
            if len != c {
                return Err(TensorError::shape(name, c, len));
            }
        }
        let eps = cst::<T>(BN_EPS);
        let count = n * x.plane_len();
        let mut mean = vec![T::zero(); c];
        let mut inv_std = vec![T::zero(); c];
        let mut stats = None;
        if training {
            let mut var_unbiased = vec![T::zero(); c];
            let m = cst::<T>(count as f64);
            for ch in 0..c {
                let mut s = T::zero();
                for i in 0..n {
                    s = s + x.plane(i, ch).iter().copied().sum::<T>();
                }
                let mu = s / m;
                let mut ss = T::zero();
                for i in 0..n {
                    for &v in x.plane(i, ch) {
                        let d = v - mu;
                        ss = ss + d * d;
                    }
                }
                let var = ss / m;
                mean[ch] = mu;
                inv_std[ch] = T::one() / (var + eps).sqrt();
                var_unbiased[ch] = if count > 1 { ss / cst((count - 1) as f64) } else { var };
            }
            stats = Some(BatchStats { mean: mean.clone(), var: var_unbiased });
        } else {
            for ch in 0..c {
                mean[ch] = running_mean[ch];
                inv_std[ch] = T::one() / (running_var[ch] + eps).sqrt();
            }
        }
        let gd = self.value(gamma).data().to_vec();
        let bd = self.value(beta).data().to_vec();
        let mut out = x.clone();
        for i in 0..n {
            for ch in 0..c {
                let scale = gd[ch] * inv_std[ch];
                let (mu, shift) = (mean[ch], bd[ch]);
                for v in out.plane_mut(i, ch) {
                    *v = (*v - mu) * scale + shift;
                }
            }
        }
        let var = self.push(out, Op::BatchNorm { input, gamma, beta, mean, inv_std, training }, &[input, gamma, beta]);
        Ok((var, stats))
    }

    /// Batch normalization that updates `state` in training mode.
    pub fn batchnorm(
        &mut self,
        input: Var,
        state: &mut RunningStats<T>,
        gamma: Var,
        beta: Var,
        training: bool,
    ) -> Result<Var, TensorError> {
        let (out, stats) = self.batchnorm_with(input, gamma, beta, &state.mean, &state.var, training)?;
        if let Some(s) = stats {
            state.absorb(&s);
        }
        Ok(out)
    }
}
