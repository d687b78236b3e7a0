//! Depthwise convolution with constant per-channel kernels.

use crate::ndtensor::scalar::Scalar;
use crate::ndtensor::tape::{Op, Tape, Var};
use crate::ndtensor::{Tensor, TensorError};

fn check(x: [usize; 4], kernels: [usize; 4], stride: usize) -> Result<(), TensorError> {
    let [_, c, _, _] = x;
    let [kc, one, kh, kw] = kernels;
    if kc != c {
        return Err(TensorError::shape("fixed kernel count", c, kc));
    }
    if one != 1 {
        return Err(TensorError::shape("fixed kernel in_channels", 1, one));
    }
    if kh != kw || kh % 2 == 0 {
        return Err(TensorError::shape("fixed kernel extent", "odd square", format!("{kh}x{kw}")));
    }
    if stride == 0 {
        return Err(TensorError::shape("stride", "at least 1", 0));
    }
    Ok(())
}

/// Output indices `o` in `[0, out_len)` whose source `o * stride + offset`
/// falls inside `[0, len)`.
fn valid_outputs(offset: isize, stride: usize, len: usize, out_len: usize) -> std::ops::Range<usize> {
    let s = stride as isize;
    let lo = if offset >= 0 { 0 } else { (-offset + s - 1) / s };
    let hi = (len as isize - 1 - offset).div_euclid(s) + 1;
    let hi = hi.clamp(0, out_len as isize) as usize;
    (lo as usize).min(hi)..hi
}

/// Same-size zero-padded true convolution of each channel with its own
/// kernel, evaluated on every `stride`-th pixel.
///
/// Taps are accumulated relative to the centre pixel, so a kernel whose
/// weights sum to exactly zero yields exactly zero wherever its support
/// lies on a constant patch.
pub fn fixed_depthwise_forward<T: Scalar>(
    x: &Tensor<T>,
    kernels: &Tensor<T>,
    stride: usize,
) -> Result<Tensor<T>, TensorError> {
    check(x.shape(), kernels.shape(), stride)?;
    let [n, c, h, w] = x.shape();
    let side = kernels.height();
    let r = (side / 2) as isize;
    let (oh, ow) = (h.div_ceil(stride), w.div_ceil(stride));
    let mut out = Tensor::zeros([n, c, oh, ow]);
    let mut centre = vec![T::zero(); oh * ow];
    for ch in 0..c {
        let k = kernels.plane(ch, 0);
        // Sum of the taps that land inside the image, per output pixel.
        let mut ksum = vec![T::zero(); oh * ow];
        for v in 0..side {
            let dy = r - v as isize;
            let ys = valid_outputs(dy, stride, h, oh);
            for u in 0..side {
                let kv = k[v * side + u];
                let xs = valid_outputs(r - u as isize, stride, w, ow);
                for oy in ys.clone() {
                    for ox in xs.clone() {
                        ksum[oy * ow + ox] = ksum[oy * ow + ox] + kv;
                    }
                }
            }
        }
        for i in 0..n {
            let src = x.plane(i, ch);
            for oy in 0..oh {
                for ox in 0..ow {
                    centre[oy * ow + ox] = src[oy * stride * w + ox * stride];
                }
            }
            let dst = out.plane_mut(i, ch);
            for v in 0..side {
                let dy = r - v as isize;
                let ys = valid_outputs(dy, stride, h, oh);
                for u in 0..side {
                    let kv = k[v * side + u];
                    if kv == T::zero() {
                        continue;
                    }
                    let dx = r - u as isize;
                    let xs = valid_outputs(dx, stride, w, ow);
                    for oy in ys.clone() {
                        let row = ((oy * stride) as isize + dy) as usize * w;
                        let base = oy * ow;
                        for ox in xs.clone() {
                            let sx = ((ox * stride) as isize + dx) as usize;
                            dst[base + ox] = dst[base + ox] + kv * (src[row + sx] - centre[base + ox]);
                        }
                    }
                }
            }
            for ((d, &ks), &cv) in dst.iter_mut().zip(&ksum).zip(&centre) {
                *d = *d + ks * cv;
            }
        }
    }
    Ok(out)
}

pub(crate) fn fixed_depthwise_backward<T: Scalar>(
    g: &Tensor<T>,
    input_shape: [usize; 4],
    kernels: &Tensor<T>,
    stride: usize,
) -> Tensor<T> {
    let [n, c, h, w] = input_shape;
    let [_, _, oh, ow] = g.shape();
    let side = kernels.height();
    let r = (side / 2) as isize;
    let mut out = Tensor::zeros(input_shape);
    for ch in 0..c {
        let k = kernels.plane(ch, 0);
        for i in 0..n {
            let gp = g.plane(i, ch);
            let dst = out.plane_mut(i, ch);
            for v in 0..side {
                let dy = r - v as isize;
                let ys = valid_outputs(dy, stride, h, oh);
                for u in 0..side {
                    let kv = k[v * side + u];
                    if kv == T::zero() {
                        continue;
                    }
                    let dx = r - u as isize;
                    let xs = valid_outputs(dx, stride, w, ow);
                    for oy in ys.clone() {
                        let row = ((oy * stride) as isize + dy) as usize * w;
                        for ox in xs.clone() {
                            let at = row + ((ox * stride) as isize + dx) as usize;
                            dst[at] = dst[at] + kv * gp[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }
    out
}

impl<T: Scalar> Tape<T> {
    /// Applies constant kernels `(C, 1, k, k)`; no gradient flows to them.
    pub fn fixed_depthwise(&mut self, input: Var, kernels: &Tensor<T>, stride: usize) -> Result<Var, TensorError> {
        let out = fixed_depthwise_forward(self.value(input), kernels, stride)?;
        Ok(self.push(out, Op::FixedDepthwise { input, kernels: kernels.clone(), stride }, &[input]))
    }
}
