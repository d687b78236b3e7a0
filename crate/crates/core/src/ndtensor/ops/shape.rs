use crate::ndtensor::scalar::Scalar;
use crate::ndtensor::tape::{Op, Tape, Var};
use crate::ndtensor::{Tensor, TensorError};
use crate::scalespace::{convolve_separable, convolve_separable_adjoint, Padding};

/// Keeps every `stride`-th row and column starting at index 0.
pub fn subsample_forward<T: Scalar>(x: &Tensor<T>, stride: usize) -> Tensor<T> {
    let [n, c, h, w] = x.shape();
    let (oh, ow) = (h.div_ceil(stride), w.div_ceil(stride));
    let mut out = Tensor::zeros([n, c, oh, ow]);
    for i in 0..n {
        for ch in 0..c {
            let src = x.plane(i, ch);
            let dst = out.plane_mut(i, ch);
            for oy in 0..oh {
                for ox in 0..ow {
                    dst[oy * ow + ox] = src[oy * stride * w + ox * stride];
                }
            }
        }
    }
    out
}

pub(crate) fn subsample_backward<T: Scalar>(g: &Tensor<T>, shape: [usize; 4], stride: usize) -> Tensor<T> {
    let [n, c, _, w] = shape;
    let (oh, ow) = (g.height(), g.width());
    let mut gin = Tensor::zeros(shape);
    for i in 0..n {
        for ch in 0..c {
            let src = g.plane(i, ch);
            let dst = gin.plane_mut(i, ch);
            for oy in 0..oh {
                for ox in 0..ow {
                    dst[oy * stride * w + ox * stride] = src[oy * ow + ox];
                }
            }
        }
    }
    gin
}

pub(crate) fn slice_channels_backward<T: Scalar>(g: &Tensor<T>, shape: [usize; 4], start: usize) -> Tensor<T> {
    let mut gin = Tensor::zeros(shape);
    for i in 0..shape[0] {
        for ch in 0..g.channels() {
            gin.plane_mut(i, start + ch).copy_from_slice(g.plane(i, ch));
        }
    }
    gin
}

pub(crate) fn concat_backward<T: Scalar>(g: &Tensor<T>, first_channels: usize) -> (Tensor<T>, Tensor<T>) {
    let [n, c, h, w] = g.shape();
    let mut a = Tensor::zeros([n, first_channels, h, w]);
    let mut b = Tensor::zeros([n, c - first_channels, h, w]);
    for i in 0..n {
        for ch in 0..c {
            if ch < first_channels {
                a.plane_mut(i, ch).copy_from_slice(g.plane(i, ch));
            } else {
                b.plane_mut(i, ch - first_channels).copy_from_slice(g.plane(i, ch));
            }
        }
    }
    (a, b)
}

/// Separable blur followed by `stride` subsampling.
pub fn blur_subsample_forward<T: Scalar>(x: &Tensor<T>, taps: &[T], stride: usize, padding: Padding) -> Tensor<T> {
    let full = convolve_separable(x, taps, taps, padding);
    if stride == 1 {
        full
    } else {
        subsample_forward(&full, stride)
    }
}

/// Adjoint of [`blur_subsample_forward`].
pub(crate) fn blur_backward<T: Scalar>(
    g: &Tensor<T>,
    shape: [usize; 4],
    taps: &[T],
    stride: usize,
    padding: Padding,
) -> Tensor<T> {
    let scattered = if stride == 1 { g.clone() } else { subsample_backward(g, shape, stride) };
    convolve_separable_adjoint(&scattered, taps, taps, padding)
}

impl<T: Scalar> Tape<T> {
    pub fn subsample(&mut self, input: Var, stride: usize) -> Result<Var, TensorError> {
        if stride == 0 {
            return Err(TensorError::shape("stride", "at least 1", 0));
        }
        let out = subsample_forward(self.value(input), stride);
        Ok(self.push(out, Op::Subsample { input, stride }, &[input]))
    }

    /// Channels `[start, start + count)`.
    pub fn slice_channels(&mut self, input: Var, start: usize, count: usize) -> Result<Var, TensorError> {
        let x = self.value(input);
        let [n, c, h, w] = x.shape();
        if start + count > c {
            return Err(TensorError::shape("channel slice end", format!("<= {c}"), start + count));
        }
        let mut out = Tensor::zeros([n, count, h, w]);
        for i in 0..n {
            for ch in 0..count {
                out.plane_mut(i, ch).copy_from_slice(x.plane(i, start + ch));
            }
        }
        Ok(self.push(out, Op::SliceChannels { input, start }, &[input]))
    }

    pub fn concat_channels(&mut self, first: Var, second: Var) -> Result<Var, TensorError> {
        let a = self.value(first);
        let b = self.value(second);
        let [n, c1, h, w] = a.shape();
        let [n2, c2, h2, w2] = b.shape();
        if n != n2 {
            return Err(TensorError::shape("concat batch", n, n2));
        }
        if (h, w) != (h2, w2) {
            return Err(TensorError::shape("concat spatial extent", format!("{h}x{w}"), format!("{h2}x{w2}")));
        }
        let mut out = Tensor::zeros([n, c1 + c2, h, w]);
        for i in 0..n {
            for ch in 0..c1 {
                out.plane_mut(i, ch).copy_from_slice(a.plane(i, ch));
            }
            for ch in 0..c2 {
                out.plane_mut(i, c1 + ch).copy_from_slice(b.plane(i, ch));
            }
        }
        Ok(self.push(out, Op::Concat { first, second }, &[first, second]))
    }

    /// Fixed separable blur (same 1-D `taps` along both axes) then
    /// subsampling by `stride`.
    pub fn blur_subsample(&mut self, input: Var, taps: &[T], stride: usize, padding: Padding) -> Result<Var, TensorError> {
        if stride == 0 {
            return Err(TensorError::shape("stride", "at least 1", 0));
        }
        if taps.len().is_multiple_of(2) {
            return Err(TensorError::shape("blur taps", "odd length", taps.len()));
        }
        let out = blur_subsample_forward(self.value(input), taps, stride, padding);
        Ok(self.push(out, Op::Blur { input, taps: taps.to_vec(), stride, padding }, &[input]))
    }
}
