use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::ndtensor::Tensor;

use super::FreqProbeError;

/// Largest imaginary magnitude tolerated after an inverse transform of a
/// conjugate-symmetric spectrum.
pub const IMAG_RESIDUE_LIMIT: f64 = 1e-8;

/// Planned 2-D transforms for one `h x w` plane size. Spectra are centred:
/// DC sits at `(h / 2, w / 2)` (integer division).
#[derive(Clone)]
pub struct Fft2 {
    h: usize,
    w: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(h: usize, w: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            h,
            w,
            row_fwd: planner.plan_fft_forward(w),
            col_fwd: planner.plan_fft_forward(h),
            row_inv: planner.plan_fft_inverse(w),
            col_inv: planner.plan_fft_inverse(h),
        }
    }

    fn transform(&self, buf: &mut [Complex64], rows: &Arc<dyn Fft<f64>>, cols: &Arc<dyn Fft<f64>>) {
        let (h, w) = (self.h, self.w);
        for row in buf.chunks_exact_mut(w) {
            rows.process(row);
        }
        let mut col = vec![Complex64::default(); h];
        for x in 0..w {
            for y in 0..h {
                col[y] = buf[y * w + x];
            }
            cols.process(&mut col);
            for y in 0..h {
                buf[y * w + x] = col[y];
            }
        }
    }

    /// Unnormalized forward transform of a real plane, centred.
    pub fn forward(&self, plane: &[f64]) -> Vec<Complex64> {
        let (h, w) = (self.h, self.w);
        assert_eq!(plane.len(), h * w);
        let mut buf: Vec<Complex64> = plane.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, &self.row_fwd, &self.col_fwd);
        let (cy, cx) = (h / 2, w / 2);
        let mut out = vec![Complex64::default(); h * w];
        for u in 0..h {
            for v in 0..w {
                out[((u + cy) % h) * w + (v + cx) % w] = buf[u * w + v];
            }
        }
        out
    }

    /// Inverse of [`Fft2::forward`]; returns the real part and the largest
    /// discarded imaginary magnitude.
    pub fn inverse(&self, centred: &[Complex64]) -> (Vec<f64>, f64) {
        let (h, w) = (self.h, self.w);
        assert_eq!(centred.len(), h * w);
        let (cy, cx) = (h / 2, w / 2);
        let mut buf = vec![Complex64::default(); h * w];
        for u in 0..h {
            for v in 0..w {
                buf[u * w + v] = centred[((u + cy) % h) * w + (v + cx) % w];
            }
        }
        self.transform(&mut buf, &self.row_inv, &self.col_inv);
        let scale = 1.0 / (h * w) as f64;
        let mut residue = 0.0f64;
        let real = buf
            .iter()
            .map(|c| {
                residue = residue.max((c.im * scale).abs());
                c.re * scale
            })
            .collect();
        (real, residue)
    }

    /// Masks the centred spectrum of `plane` and transforms back.
    pub fn filter(&self, plane: &[f64], keep: &[bool]) -> Result<Vec<f64>, FreqProbeError> {
        let mut spec = self.forward(plane);
        for (s, &k) in spec.iter_mut().zip(keep) {
            if !k {
                *s = Complex64::default();
            }
        }
        let (real, residue) = self.inverse(&spec);
        if residue > IMAG_RESIDUE_LIMIT {
            return Err(FreqProbeError::ImaginaryResidue(residue));
        }
        Ok(real)
    }
}

/// Centred spectra of every `(n, c)` plane of a tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub shape: [usize; 4],
    pub data: Vec<Complex64>,
}

impl Spectrum {
    pub fn plane(&self, n: usize, c: usize) -> &[Complex64] {
        let [_, cs, h, w] = self.shape;
        let at = (n * cs + c) * h * w;
        &self.data[at..at + h * w]
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }
}

pub fn dft2(image: &Tensor<f64>) -> Spectrum {
    let [n, c, h, w] = image.shape();
    let fft = Fft2::new(h, w);
    let mut data = Vec::with_capacity(image.len());
    for i in 0..n {
        for ch in 0..c {
            data.extend(fft.forward(image.plane(i, ch)));
        }
    }
    Spectrum { shape: image.shape(), data }
}

pub fn idft2(spectrum: &Spectrum) -> Result<Tensor<f64>, FreqProbeError> {
    let [n, c, h, w] = spectrum.shape;
    let fft = Fft2::new(h, w);
    let mut out = Tensor::zeros(spectrum.shape);
    for i in 0..n {
        for ch in 0..c {
            let (real, residue) = fft.inverse(spectrum.plane(i, ch));
            if residue > IMAG_RESIDUE_LIMIT {
                return Err(FreqProbeError::ImaginaryResidue(residue));
            }
            out.plane_mut(i, ch).copy_from_slice(&real);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PassType {
    Low,
    High,
}

impl PassType {
    pub fn as_str(self) -> &'static str {
        match self {
            PassType::Low => "low",
            PassType::High => "high",
        }
    }
}

impl std::str::FromStr for PassType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "low" => Ok(Self::Low),
            "high" => Ok(Self::High),
            other => Err(format!("unknown pass type '{other}' (low|high)")),
        }
    }
}

/// Hard circular mask in the centred spectrum. Low keeps bins at distance
/// `<= radius` from DC, high keeps the rest.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdealFilter {
    pub radius: f64,
    pub pass: PassType,
}

/// Euclidean distance in bins from DC of centred index `(y, x)`.
pub fn bin_distance(y: usize, x: usize, h: usize, w: usize) -> f64 {
    let dy = y as f64 - (h / 2) as f64;
    let dx = x as f64 - (w / 2) as f64;
    (dy * dy + dx * dx).sqrt()
}

/// Distance from DC to the farthest bin.
pub fn max_distance(h: usize, w: usize) -> f64 {
    let (dy, dx) = ((h / 2) as f64, (w / 2) as f64);
    (dy * dy + dx * dx).sqrt()
}

impl IdealFilter {
    pub fn low(radius: f64) -> Self {
        Self { radius, pass: PassType::Low }
    }

    pub fn high(radius: f64) -> Self {
        Self { radius, pass: PassType::High }
    }

    pub fn keeps(&self, distance: f64) -> bool {
        match self.pass {
            PassType::Low => distance <= self.radius,
            PassType::High => distance > self.radius,
        }
    }

    pub fn mask(&self, h: usize, w: usize) -> Vec<bool> {
        (0..h * w).map(|i| self.keeps(bin_distance(i / w, i % w, h, w))).collect()
    }

    /// True when the mask keeps every bin, so filtering is the identity.
    pub fn is_identity(&self, h: usize, w: usize) -> bool {
        self.pass == PassType::Low && self.radius >= max_distance(h, w)
    }
}

/// Filters every channel independently. An all-pass mask returns the input
/// untouched.
pub fn apply_filter(image: &Tensor<f64>, filter: IdealFilter) -> Result<Tensor<f64>, FreqProbeError> {
    let [n, c, h, w] = image.shape();
    if filter.is_identity(h, w) {
        return Ok(image.clone());
    }
    let fft = Fft2::new(h, w);
    let keep = filter.mask(h, w);
    let mut out = Tensor::zeros(image.shape());
    for i in 0..n {
        for ch in 0..c {
            let plane = fft.filter(image.plane(i, ch), &keep)?;
            out.plane_mut(i, ch).copy_from_slice(&plane);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(h: usize, w: usize) -> Tensor<f64> {
        Tensor::from_fn([1, 1, h, w], |[_, _, y, x]| ((y * 31 + x * 17) % 23) as f64 / 22.0)
    }

    #[test]
    fn constant_image_has_only_dc() {
        for (h, w) in [(8, 8), (7, 10)] {
            let s = dft2(&Tensor::full([1, 1, h, w], 0.25));
            for (i, v) in s.data.iter().enumerate() {
                if i == (h / 2) * w + w / 2 {
                    assert!((v.re - 0.25 * (h * w) as f64).abs() < 1e-12);
                    assert!(v.im.abs() < 1e-12);
                } else {
                    assert!(v.norm() < 1e-12, "bin {i}: {v}");
                }
            }
        }
    }

    #[test]
    fn impulse_has_flat_magnitude() {
        let mut f = Tensor::<f64>::zeros([1, 1, 9, 12]);
        f.set([0, 0, 3, 5], 1.0);
        let s = dft2(&f);
        assert!(s.data.iter().all(|c| (c.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn round_trip_odd_and_even() {
        for (h, w) in [(28, 28), (9, 7), (1, 5)] {
            let f = image(h, w);
            let back = idft2(&dft2(&f)).unwrap();
            assert!(back.max_abs_diff(&f) < 1e-12);
        }
    }

    #[test]
    fn masks_partition_spectrum() {
        for r in [0.0, 2.5, 4.0, 100.0] {
            let lo = IdealFilter::low(r).mask(10, 11);
            let hi = IdealFilter::high(r).mask(10, 11);
            assert!(lo.iter().zip(&hi).all(|(a, b)| a != b));
        }
    }

    #[test]
    fn radius_zero_low_pass_is_mean() {
        let f = image(12, 12);
        let mean = f.sum() / f.len() as f64;
        let g = apply_filter(&f, IdealFilter::low(0.0)).unwrap();
        assert!(g.data().iter().all(|v| (v - mean).abs() < 1e-12));
    }

    #[test]
    fn full_radius_low_pass_is_bitwise_identity() {
        let f = image(28, 28);
        assert_eq!(apply_filter(&f, IdealFilter::low(max_distance(28, 28))).unwrap(), f);
    }

    #[test]
    fn dc_bin_location() {
        assert_eq!(bin_distance(14, 14, 28, 28), 0.0);
        assert_eq!(bin_distance(3, 3, 7, 7), 0.0);
        assert_eq!(max_distance(28, 28), (2.0f64 * 14.0 * 14.0).sqrt());
    }
}
