use crate::ndtensor::scalar::{cst, Scalar};
use crate::ndtensor::tape::{Op, Tape, Var};
use crate::ndtensor::{Tensor, TensorError};

pub fn global_avg_pool_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let [n, c, _, _] = x.shape();
    let denom = cst::<T>(x.plane_len() as f64);
    let mut out = Tensor::zeros([n, c, 1, 1]);
    for i in 0..n {
        for ch in 0..c {
            let s: T = x.plane(i, ch).iter().copied().sum();
            out.set([i, ch, 0, 0], s / denom);
        }
    }
    out
}

pub(crate) fn global_avg_pool_backward<T: Scalar>(g: &Tensor<T>, shape: [usize; 4]) -> Tensor<T> {
    let [n, c, h, w] = shape;
    let denom = cst::<T>((h * w) as f64);
    let mut gin = Tensor::zeros(shape);
    for i in 0..n {
        for ch in 0..c {
            let v = g.at([i, ch, 0, 0]) / denom;
            gin.plane_mut(i, ch).fill(v);
        }
    }
    gin
}

/// Sum over batch and spatial axes, shaped `(C, 1, 1, 1)`.
pub(crate) fn channel_sums<T: Scalar>(g: &Tensor<T>) -> Tensor<T> {
    let [n, c, _, _] = g.shape();
    let mut out = Tensor::zeros([c, 1, 1, 1]);
    for i in 0..n {
        for ch in 0..c {
            let s: T = g.plane(i, ch).iter().copied().sum();
            out.data_mut()[ch] = out.data()[ch] + s;
        }
    }
    out
}

impl<T: Scalar> Tape<T> {
    pub fn global_avg_pool(&mut self, input: Var) -> Result<Var, TensorError> {
        let x = self.value(input);
        if x.height() == 0 || x.width() == 0 {
            return Err(TensorError::shape("pool spatial extent", "at least 1x1", 0));
        }
        let out = global_avg_pool_forward(x);
        Ok(self.push(out, Op::GlobalAvgPool { input }, &[input]))
    }
}
