use super::scalar::{cst, Scalar};
use super::{Tensor, TensorError};

/// SGD with heavy-ball momentum and coupled L2 weight decay.
#[derive(Clone, Debug)]
pub struct OptimizerState<T> {
    pub momentum: f64,
    pub weight_decay: f64,
    buffers: Vec<Vec<T>>,
    shapes: Vec<[usize; 4]>,
    decay_exempt: Vec<bool>,
}

impl<T: Scalar> OptimizerState<T> {
    /// One zeroed momentum buffer per `(shape, decay_exempt)` entry.
    pub fn new(params: impl IntoIterator<Item = ([usize; 4], bool)>, momentum: f64, weight_decay: f64) -> Self {
        let (shapes, decay_exempt): (Vec<_>, Vec<_>) = params.into_iter().unzip();
        let buffers = shapes.iter().map(|s| vec![T::zero(); s.iter().product()]).collect();
        Self { momentum, weight_decay, buffers, shapes, decay_exempt }
    }

    pub fn len(&self) -> usize {
        self.buffers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffers.is_empty()
    }

    pub fn buffer(&self, i: usize) -> &[T] {
        &self.buffers[i]
    }

    pub fn is_decay_exempt(&self, i: usize) -> bool {
        self.decay_exempt[i]
    }
}

/// `v <- mu * v + g + lambda * w; w <- w - lr * v`, with `lambda = 0` for
/// decay-exempt parameters.
pub fn sgd_step<T: Scalar>(
    params: &mut [&mut Tensor<T>],
    grads: &[&Tensor<T>],
    state: &mut OptimizerState<T>,
    lr: f64,
) -> Result<(), TensorError> {
    if params.len() != state.len() || grads.len() != state.len() {
        return Err(TensorError::shape("optimizer parameter count", state.len(), params.len().max(grads.len())));
    }
    let mu = cst::<T>(state.momentum);
    let lr_t = cst::<T>(lr);
    for (i, (w, g)) in params.iter_mut().zip(grads).enumerate() {
        if w.shape() != state.shapes[i] || g.shape() != state.shapes[i] {
            return Err(TensorError::shape(
                "optimizer parameter shape",
                format!("{:?}", state.shapes[i]),
                format!("weight {:?}, gradient {:?}", w.shape(), g.shape()),
            ));
        }
        let lambda = if state.decay_exempt[i] { T::zero() } else { cst::<T>(state.weight_decay) };
        let buf = &mut state.buffers[i];
        for ((wv, &gv), v) in w.data_mut().iter_mut().zip(g.data()).zip(buf.iter_mut()) {
            let mut step = gv;
            if lambda != T::zero() {
                step = step + lambda * *wv;
            }
            *v = mu * *v + step;
            *wv = *wv - lr_t * *v;
        }
    }
    Ok(())
}
