use crate::ndtensor::scalar::cst;
use crate::ndtensor::{Scalar, Tensor};

use super::kernels::{DerivativeOperator, GaussianKernel};
use super::ScaleSpaceError;

/// How samples outside the image are synthesized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Padding {
    Zero,
    /// Edge value repeated outward.
    #[default]
    Replicate,
    /// Half-sample mirror: `..., f1, f0 | f0, f1, ...`.
    Symmetric,
}

impl Padding {
    /// Source index for logical position `i`, or `None` for a zero sample.
    #[inline]
    pub fn resolve(self, i: isize, len: usize) -> Option<usize> {
        let n = len as isize;
        if (0..n).contains(&i) {
            return Some(i as usize);
        }
        match self {
            Padding::Zero => None,
            Padding::Replicate => Some(i.clamp(0, n - 1) as usize),
            Padding::Symmetric => {
                let m = i.rem_euclid(2 * n);
                Some(if m < n { m } else { 2 * n - 1 - m } as usize)
            }
        }
    }
}

impl std::str::FromStr for Padding {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero" => Ok(Self::Zero),
            "replicate" => Ok(Self::Replicate),
            "symmetric" => Ok(Self::Symmetric),
            other => Err(format!("unknown padding '{other}' (zero|replicate|symmetric)")),
        }
    }
}

fn convolve_rows<T: Scalar>(src: &[T], dst: &mut [T], h: usize, w: usize, taps: &[T], padding: Padding) {
    let r = taps.len() / 2;
    let mut padded = vec![T::zero(); w + 2 * r];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for (p, slot) in padded.iter_mut().enumerate() {
            *slot = padding.resolve(p as isize - r as isize, w).map_or(T::zero(), |i| row[i]);
        }
        let out = &mut dst[y * w..(y + 1) * w];
        for (x, o) in out.iter_mut().enumerate() {
            let mut acc = T::zero();
            for (j, &t) in taps.iter().enumerate() {
                acc = acc + t * padded[x + 2 * r - j];
            }
            *o = acc;
        }
    }
}

fn convolve_cols<T: Scalar>(src: &[T], dst: &mut [T], h: usize, w: usize, taps: &[T], padding: Padding) {
    let r = taps.len() / 2;
    dst.iter_mut().for_each(|v| *v = T::zero());
    for y in 0..h {
        let out = &mut dst[y * w..(y + 1) * w];
        for (j, &t) in taps.iter().enumerate() {
            let Some(sy) = padding.resolve(y as isize + r as isize - j as isize, h) else {
                continue;
            };
            let row = &src[sy * w..(sy + 1) * w];
            for (o, &v) in out.iter_mut().zip(row) {
                *o = *o + t * v;
            }
        }
    }
}

/// Convolves every plane with `taps_x` along x and then `taps_y` along y.
/// Both tap vectors must have odd length.
pub fn convolve_separable<T: Scalar>(x: &Tensor<T>, taps_x: &[T], taps_y: &[T], padding: Padding) -> Tensor<T> {
    debug_assert!(taps_x.len() % 2 == 1 && taps_y.len() % 2 == 1);
    let [n, c, h, w] = x.shape();
    let mut tmp = vec![T::zero(); h * w];
    let mut out = Tensor::zeros(x.shape());
    for i in 0..n {
        for ch in 0..c {
            convolve_rows(x.plane(i, ch), &mut tmp, h, w, taps_x, padding);
            convolve_cols(&tmp, out.plane_mut(i, ch), h, w, taps_y, padding);
        }
    }
    out
}

fn rows_adjoint<T: Scalar>(src: &[T], dst: &mut [T], h: usize, w: usize, taps: &[T], padding: Padding) {
    let r = taps.len() / 2;
    dst.iter_mut().for_each(|v| *v = T::zero());
    for y in 0..h {
        let g = &src[y * w..(y + 1) * w];
        let out = &mut dst[y * w..(y + 1) * w];
        for (x, &gv) in g.iter().enumerate() {
            for (j, &t) in taps.iter().enumerate() {
                if let Some(i) = padding.resolve(x as isize + r as isize - j as isize, w) {
                    out[i] = out[i] + t * gv;
                }
            }
        }
    }
}

fn cols_adjoint<T: Scalar>(src: &[T], dst: &mut [T], h: usize, w: usize, taps: &[T], padding: Padding) {
    let r = taps.len() / 2;
    dst.iter_mut().for_each(|v| *v = T::zero());
    for y in 0..h {
        let g = &src[y * w..(y + 1) * w];
        for (j, &t) in taps.iter().enumerate() {
            let Some(sy) = padding.resolve(y as isize + r as isize - j as isize, h) else {
                continue;
            };
            let out = &mut dst[sy * w..(sy + 1) * w];
            for (o, &gv) in out.iter_mut().zip(g) {
                *o = *o + t * gv;
            }
        }
    }
}

/// Transpose of [`convolve_separable`] as a linear map, for back-propagation.
pub fn convolve_separable_adjoint<T: Scalar>(g: &Tensor<T>, taps_x: &[T], taps_y: &[T], padding: Padding) -> Tensor<T> {
    let [n, c, h, w] = g.shape();
    let mut tmp = vec![T::zero(); h * w];
    let mut out = Tensor::zeros(g.shape());
    for i in 0..n {
        for ch in 0..c {
            cols_adjoint(g.plane(i, ch), &mut tmp, h, w, taps_y, padding);
            rows_adjoint(&tmp, out.plane_mut(i, ch), h, w, taps_x, padding);
        }
    }
    out
}

/// Direct 2-D convolution (kernel flipped) of every plane with a row-major
/// `(2r+1) x (2r+1)` weight grid.
///
/// Samples are accumulated relative to the centre pixel and the kernel sum
/// is added back once, so a zero-sum kernel maps locally constant regions to
/// exactly zero.
pub fn convolve_2d<T: Scalar>(x: &Tensor<T>, weights: &[f64], radius: usize, padding: Padding) -> Tensor<T> {
    let side = 2 * radius + 1;
    assert_eq!(weights.len(), side * side, "weight grid must be (2r+1)^2");
    let k: Vec<T> = weights.iter().map(|&v| cst(v)).collect();
    let [n, c, h, w] = x.shape();
    let r = radius as isize;
    let mut out = Tensor::zeros(x.shape());
    for i in 0..n {
        for ch in 0..c {
            let src = x.plane(i, ch);
            let dst = out.plane_mut(i, ch);
            for y in 0..h {
                for xx in 0..w {
                    let centre = src[y * w + xx];
                    let mut acc = T::zero();
                    let mut ksum = T::zero();
                    for v in 0..side {
                        let Some(sy) = padding.resolve(y as isize + r - v as isize, h) else {
                            continue;
                        };
                        for u in 0..side {
                            if let Some(sx) = padding.resolve(xx as isize + r - u as isize, w) {
                                let kv = k[v * side + u];
                                acc = acc + kv * (src[sy * w + sx] - centre);
                                ksum = ksum + kv;
                            }
                        }
                    }
                    dst[y * w + xx] = acc + ksum * centre;
                }
            }
        }
    }
    out
}

/// Gaussian smoothing at standard deviation `sigma`; `sigma == 0` is the identity.
pub fn blur<T: Scalar>(x: &Tensor<T>, sigma: f64, padding: Padding) -> Result<Tensor<T>, ScaleSpaceError> {
    if sigma == 0.0 {
        return Ok(x.clone());
    }
    let k = GaussianKernel::new(sigma, None)?;
    let taps: Vec<T> = k.taps().iter().map(|&v| cst(v)).collect();
    Ok(convolve_separable(x, &taps, &taps, padding))
}

/// Gaussian-derivative response `d^(m+n) (g * f) / dx^m dy^n`.
pub fn derivative<T: Scalar>(
    x: &Tensor<T>,
    sigma: f64,
    m: usize,
    n: usize,
    padding: Padding,
) -> Result<Tensor<T>, ScaleSpaceError> {
    let op = DerivativeOperator::new(sigma, m, n)?;
    Ok(apply_operator(x, &op, padding))
}

pub fn apply_operator<T: Scalar>(x: &Tensor<T>, op: &DerivativeOperator, padding: Padding) -> Tensor<T> {
    convolve_2d(x, op.weights(), op.radius(), padding)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize, f: impl Fn(f64, f64) -> f64) -> Tensor<f64> {
        Tensor::from_fn([1, 1, h, w], |[_, _, y, x]| f(x as f64, y as f64))
    }

    fn centre(t: &Tensor<f64>) -> f64 {
        t.at([0, 0, t.height() / 2, t.width() / 2])
    }

    #[test]
    fn adjoint_satisfies_inner_product_identity() {
        let x = ramp(7, 9, |x, y| (x * 1.3 + y * 0.7).sin());
        let g = ramp(7, 9, |x, y| (x * 0.4 - y * 1.1).cos());
        let tx = [0.1, 0.5, 0.3, 0.2, -0.1];
        let ty = [0.25, 0.5, 0.125];
        for p in [Padding::Zero, Padding::Replicate, Padding::Symmetric] {
            let ax = convolve_separable(&x, &tx, &ty, p);
            let atg = convolve_separable_adjoint(&g, &tx, &ty, p);
            let lhs: f64 = ax.data().iter().zip(g.data()).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.data().iter().zip(atg.data()).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-12, "{p:?}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn padding_resolution() {
        assert_eq!(Padding::Zero.resolve(-1, 4), None);
        assert_eq!(Padding::Replicate.resolve(-3, 4), Some(0));
        assert_eq!(Padding::Replicate.resolve(6, 4), Some(3));
        assert_eq!(Padding::Symmetric.resolve(-1, 4), Some(0));
        assert_eq!(Padding::Symmetric.resolve(-2, 4), Some(1));
        assert_eq!(Padding::Symmetric.resolve(4, 4), Some(3));
        assert_eq!(Padding::Symmetric.resolve(9, 4), Some(1));
        assert_eq!(Padding::Symmetric.resolve(-9, 4), Some(0));
    }

    #[test]
    fn zero_sigma_is_identity() {
        let f = ramp(5, 6, |x, y| x * 0.3 - y * y);
        assert_eq!(blur(&f, 0.0, Padding::Replicate).unwrap(), f);
    }

    #[test]
    fn constant_image_survives_blur() {
        let f = Tensor::<f64>::full([1, 2, 9, 7], 0.75);
        for p in [Padding::Replicate, Padding::Symmetric] {
            let g = blur(&f, 1.3, p).unwrap();
            assert!(g.data().iter().all(|&v| (v - 0.75).abs() < 1e-12));
        }
    }

    #[test]
    fn separable_matches_direct_2d() {
        let f = ramp(19, 23, |x, y| (0.37 * x).sin() + (0.21 * y * x).cos());
        for p in [Padding::Zero, Padding::Replicate, Padding::Symmetric] {
            let k = GaussianKernel::new(1.4, None).unwrap();
            let a = blur(&f, 1.4, p).unwrap();
            let b = convolve_2d(&f, k.weights(), k.radius(), p);
            assert!(a.max_abs_diff(&b) < 1e-12, "{p:?}: {}", a.max_abs_diff(&b));
        }
    }

    #[test]
    fn derivative_of_linear_ramp() {
        let f = ramp(41, 41, |x, _| x);
        let dx = derivative(&f, 1.0, 1, 0, Padding::Replicate).unwrap();
        assert!((centre(&dx) - 1.0).abs() < 1e-6, "{}", centre(&dx));
        let dy = derivative(&f, 1.0, 0, 1, Padding::Replicate).unwrap();
        assert!(centre(&dy).abs() < 1e-12);
        for (m, n) in [(2, 0), (1, 1), (0, 2)] {
            let d = derivative(&f, 1.0, m, n, Padding::Replicate).unwrap();
            assert!(centre(&d).abs() < 1e-12, "({m},{n})");
        }
    }

    #[test]
    fn second_derivative_of_parabola() {
        let f = ramp(41, 41, |x, _| (x - 20.0).powi(2));
        let d = derivative(&f, 1.0, 2, 0, Padding::Replicate).unwrap();
        assert!((centre(&d) - 2.0).abs() < 1e-3, "{}", centre(&d));
    }

    #[test]
    fn mixed_derivative_of_product() {
        let f = ramp(41, 41, |x, y| (x - 20.0) * (y - 20.0));
        let d = derivative(&f, 1.2, 1, 1, Padding::Replicate).unwrap();
        assert!((centre(&d) - 1.0).abs() < 1e-5, "{}", centre(&d));
    }

    #[test]
    fn convolution_is_not_correlation() {
        // An impulse reproduces the flipped-back kernel: out(y, x) = k(y - y0, x - x0).
        let mut f = Tensor::<f64>::zeros([1, 1, 11, 11]);
        f.set([0, 0, 5, 5], 1.0);
        let op = DerivativeOperator::new(1.0, 1, 0).unwrap();
        let out = apply_operator(&f, &op, Padding::Zero);
        for y in -3isize..=3 {
            for x in -3isize..=3 {
                let v = out.at([0, 0, (5 + y) as usize, (5 + x) as usize]);
                assert_eq!(v, op.at(y, x));
            }
        }
    }
}
