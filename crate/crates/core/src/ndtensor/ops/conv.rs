use crate::ndtensor::scalar::{matmul_into, MatRef, Scalar};
use crate::ndtensor::tape::{Op, Tape, Var};
use crate::ndtensor::{Tensor, TensorError};

/// Output extent of a convolution along one axis.
pub fn conv_out_extent(input: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    (input + 2 * padding).checked_sub(kernel).map(|v| v / stride + 1)
}

/// Output positions `o` in `[lo, hi)` whose tap `o * stride + k - padding`
/// lands inside `[0, in_len)`.
#[inline]
fn valid_range(k: usize, padding: usize, stride: usize, in_len: usize, out_len: usize) -> (usize, usize) {
    let lo = if k >= padding { 0 } else { (padding - k).div_ceil(stride) };
    let hi = if in_len + padding > k { ((in_len - 1 + padding - k) / stride + 1).min(out_len) } else { 0 };
    (lo, hi.max(lo))
}

struct ConvGeom {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    oc: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
    stride: usize,
    padding: usize,
    groups: usize,
}

impl ConvGeom {
    fn in_per_group(&self) -> usize {
        self.c / self.groups
    }
    fn out_per_group(&self) -> usize {
        self.oc / self.groups
    }
}

fn geometry(
    input: [usize; 4],
    weight: [usize; 4],
    stride: usize,
    padding: usize,
    groups: usize,
) -> Result<ConvGeom, TensorError> {
    let [n, c, h, w] = input;
    let [oc, icg, kh, kw] = weight;
    if stride == 0 {
        return Err(TensorError::shape("stride", "at least 1", 0));
    }
    if groups == 0 || c % groups != 0 {
        return Err(TensorError::shape("input channels", format!("divisible by groups={groups}"), c));
    }
    if oc % groups != 0 {
        return Err(TensorError::shape("output channels", format!("divisible by groups={groups}"), oc));
    }
    if icg != c / groups {
        return Err(TensorError::shape("weight in_channels/groups", c / groups, icg));
    }
    let oh = conv_out_extent(h, kh, stride, padding)
        .filter(|&v| v > 0)
        .ok_or_else(|| TensorError::shape("kernel height", format!("<= padded height {}", h + 2 * padding), kh))?;
    let ow = conv_out_extent(w, kw, stride, padding)
        .filter(|&v| v > 0)
        .ok_or_else(|| TensorError::shape("kernel width", format!("<= padded width {}", w + 2 * padding), kw))?;
    Ok(ConvGeom { n, c, h, w, oc, kh, kw, oh, ow, stride, padding, groups })
}

/// Grouped 2-D cross-correlation, `NCHW` input and `(O, C/groups, kH, kW)` weights.
pub fn conv2d_forward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    stride: usize,
    padding: usize,
    groups: usize,
) -> Result<Tensor<T>, TensorError> {
    let g = geometry(input.shape(), weight.shape(), stride, padding, groups)?;
    let mut out = Tensor::zeros([g.n, g.oc, g.oh, g.ow]);
    let (ipg, opg) = (g.in_per_group(), g.out_per_group());
    let wd = weight.data();
    for n in 0..g.n {
        for oc in 0..g.oc {
            let grp = oc / opg;
            let out_plane = out.plane_mut(n, oc);
            for icl in 0..ipg {
                let in_plane = input.plane(n, grp * ipg + icl);
                let wbase = (oc * ipg + icl) * g.kh * g.kw;
                for ky in 0..g.kh {
                    let (oy_lo, oy_hi) = valid_range(ky, g.padding, g.stride, g.h, g.oh);
                    for kx in 0..g.kw {
                        let wv = wd[wbase + ky * g.kw + kx];
                        let (ox_lo, ox_hi) = valid_range(kx, g.padding, g.stride, g.w, g.ow);
                        if ox_lo >= ox_hi {
                            continue;
                        }
                        for oy in oy_lo..oy_hi {
                            let iy = oy * g.stride + ky - g.padding;
                            let in_row = &in_plane[iy * g.w..(iy + 1) * g.w];
                            let out_row = &mut out_plane[oy * g.ow..(oy + 1) * g.ow];
                            if g.stride == 1 {
                                let ix0 = ox_lo + kx - g.padding;
                                for (o, &i) in out_row[ox_lo..ox_hi].iter_mut().zip(&in_row[ix0..]) {
                                    *o = *o + wv * i;
                                }
                            } else {
                                for (ox, o) in out_row.iter_mut().enumerate().take(ox_hi).skip(ox_lo) {
                                    let ix = ox * g.stride + kx - g.padding;
                                    *o = *o + wv * in_row[ix];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

pub(crate) fn conv2d_backward_input<T: Scalar>(
    gout: &Tensor<T>,
    weight: &Tensor<T>,
    input_shape: [usize; 4],
    stride: usize,
    padding: usize,
    groups: usize,
) -> Tensor<T> {
    let g = geometry(input_shape, weight.shape(), stride, padding, groups).expect("validated in forward");
    let mut gin = Tensor::zeros(input_shape);
    let (ipg, opg) = (g.in_per_group(), g.out_per_group());
    let wd = weight.data();
    for n in 0..g.n {
        for oc in 0..g.oc {
            let grp = oc / opg;
            let gplane = gout.plane(n, oc);
            for icl in 0..ipg {
                let gin_plane = gin.plane_mut(n, grp * ipg + icl);
                let wbase = (oc * ipg + icl) * g.kh * g.kw;
                for ky in 0..g.kh {
                    let (oy_lo, oy_hi) = valid_range(ky, g.padding, g.stride, g.h, g.oh);
                    for kx in 0..g.kw {
                        let wv = wd[wbase + ky * g.kw + kx];
                        let (ox_lo, ox_hi) = valid_range(kx, g.padding, g.stride, g.w, g.ow);
                        if ox_lo >= ox_hi {
                            continue;
                        }
                        for oy in oy_lo..oy_hi {
                            let iy = oy * g.stride + ky - g.padding;
                            let grow = &gplane[oy * g.ow..(oy + 1) * g.ow];
                            let irow = &mut gin_plane[iy * g.w..(iy + 1) * g.w];
                            if g.stride == 1 {
                                let ix0 = ox_lo + kx - g.padding;
                                for (i, &o) in irow[ix0..].iter_mut().zip(&grow[ox_lo..ox_hi]) {
                                    *i = *i + wv * o;
                                }
                            } else {
                                for (ox, &o) in grow.iter().enumerate().take(ox_hi).skip(ox_lo) {
                                    let ix = ox * g.stride + kx - g.padding;
                                    irow[ix] = irow[ix] + wv * o;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    gin
}

pub(crate) fn conv2d_backward_weight<T: Scalar>(
    gout: &Tensor<T>,
    input: &Tensor<T>,
    weight_shape: [usize; 4],
    stride: usize,
    padding: usize,
    groups: usize,
) -> Tensor<T> {
    let g = geometry(input.shape(), weight_shape, stride, padding, groups).expect("validated in forward");
    let mut gw = Tensor::zeros(weight_shape);
    let (ipg, opg) = (g.in_per_group(), g.out_per_group());
    let gwd = gw.data_mut();
    for n in 0..g.n {
        for oc in 0..g.oc {
            let grp = oc / opg;
            let gplane = gout.plane(n, oc);
            for icl in 0..ipg {
                let in_plane = input.plane(n, grp * ipg + icl);
                let wbase = (oc * ipg + icl) * g.kh * g.kw;
                for ky in 0..g.kh {
                    let (oy_lo, oy_hi) = valid_range(ky, g.padding, g.stride, g.h, g.oh);
                    for kx in 0..g.kw {
                        let (ox_lo, ox_hi) = valid_range(kx, g.padding, g.stride, g.w, g.ow);
                        if ox_lo >= ox_hi {
                            continue;
                        }
                        let mut acc = T::zero();
                        for oy in oy_lo..oy_hi {
                            let iy = oy * g.stride + ky - g.padding;
                            let grow = &gplane[oy * g.ow..(oy + 1) * g.ow];
                            let irow = &in_plane[iy * g.w..(iy + 1) * g.w];
                            if g.stride == 1 {
                                let ix0 = ox_lo + kx - g.padding;
                                for (&o, &i) in grow[ox_lo..ox_hi].iter().zip(&irow[ix0..]) {
                                    acc = acc + o * i;
                                }
                            } else {
                                for ox in ox_lo..ox_hi {
                                    acc = acc + grow[ox] * irow[ox * g.stride + kx - g.padding];
                                }
                            }
                        }
                        let wi = wbase + ky * g.kw + kx;
                        gwd[wi] = gwd[wi] + acc;
                    }
                }
            }
        }
    }
    gw
}

fn check_pointwise<T: Scalar>(input: &Tensor<T>, weight: &Tensor<T>) -> Result<(), TensorError> {
    let [_, ic, kh, kw] = weight.shape();
    if kh != 1 || kw != 1 {
        return Err(TensorError::shape("pointwise kernel extent", "1x1", kh.max(kw)));
    }
    if ic != input.channels() {
        return Err(TensorError::shape("pointwise weight in_channels", input.channels(), ic));
    }
    Ok(())
}

/// 1x1 convolution: a per-pixel linear map of the channel vector.
pub fn pointwise_forward<T: Scalar>(input: &Tensor<T>, weight: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    check_pointwise(input, weight)?;
    let [n, c, h, w] = input.shape();
    let oc = weight.shape()[0];
    let p = h * w;
    let mut out = Tensor::zeros([n, oc, h, w]);
    let wm = MatRef::row_major(weight.data(), oc, c);
    for i in 0..n {
        let x = MatRef::row_major(&input.data()[i * c * p..(i + 1) * c * p], c, p);
        matmul_into(wm, x, T::zero(), &mut out.data_mut()[i * oc * p..(i + 1) * oc * p]);
    }
    Ok(out)
}

pub(crate) fn pointwise_backward_input<T: Scalar>(gout: &Tensor<T>, weight: &Tensor<T>) -> Tensor<T> {
    let [n, oc, h, w] = gout.shape();
    let c = weight.shape()[1];
    let p = h * w;
    let mut gin = Tensor::zeros([n, c, h, w]);
    let wt = MatRef::row_major(weight.data(), oc, c).transposed();
    for i in 0..n {
        let g = MatRef::row_major(&gout.data()[i * oc * p..(i + 1) * oc * p], oc, p);
        matmul_into(wt, g, T::zero(), &mut gin.data_mut()[i * c * p..(i + 1) * c * p]);
    }
    gin
}

pub(crate) fn pointwise_backward_weight<T: Scalar>(gout: &Tensor<T>, input: &Tensor<T>) -> Tensor<T> {
    let [n, oc, h, w] = gout.shape();
    let c = input.channels();
    let p = h * w;
    let mut gw = Tensor::zeros([oc, c, 1, 1]);
    for i in 0..n {
        let g = MatRef::row_major(&gout.data()[i * oc * p..(i + 1) * oc * p], oc, p);
        let xt = MatRef::row_major(&input.data()[i * c * p..(i + 1) * c * p], c, p).transposed();
        matmul_into(g, xt, T::one(), gw.data_mut());
    }
    gw
}

impl<T: Scalar> Tape<T> {
    pub fn conv2d(
        &mut self,
        input: Var,
        weight: Var,
        stride: usize,
        padding: usize,
        groups: usize,
    ) -> Result<Var, TensorError> {
        let out = conv2d_forward(self.value(input), self.value(weight), stride, padding, groups)?;
        Ok(self.push(out, Op::Conv2d { input, weight, stride, padding, groups }, &[input, weight]))
    }

    /// One `(1, kH, kW)` kernel per channel.
    pub fn depthwise_conv2d(
        &mut self,
        input: Var,
        kernels: Var,
        stride: usize,
        padding: usize,
    ) -> Result<Var, TensorError> {
        let c = self.value(input).channels();
        let [kc, per, _, _] = self.value(kernels).shape();
        if kc != c {
            return Err(TensorError::shape("depthwise kernel count", c, kc));
        }
        if per != 1 {
            return Err(TensorError::shape("depthwise kernel in_channels", 1, per));
        }
        self.conv2d(input, kernels, stride, padding, c)
    }

    pub fn pointwise_conv(&mut self, input: Var, weight: Var) -> Result<Var, TensorError> {
        let out = pointwise_forward(self.value(input), self.value(weight))?;
        Ok(self.push(out, Op::Pointwise { input, weight }, &[input, weight]))
    }

    /// Adds one bias value per channel.
    pub fn add_bias(&mut self, input: Var, bias: Var) -> Result<Var, TensorError> {
        let x = self.value(input);
        let b = self.value(bias);
        if b.len() != x.channels() {
            return Err(TensorError::shape("bias length", x.channels(), b.len()));
        }
        let mut out = x.clone();
        let [n, c, _, _] = out.shape();
        for i in 0..n {
            for ch in 0..c {
                let bv = b.data()[ch];
                for v in out.plane_mut(i, ch) {
                    *v = *v + bv;
                }
            }
        }
        Ok(self.push(out, Op::AddBias { input, bias }, &[input, bias]))
    }
}
