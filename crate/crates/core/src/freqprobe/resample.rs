use crate::ndtensor::Tensor;

use super::FreqProbeError;

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

/// Bilinear zoom about the image centre by `factor`, cropped back to the
/// input extents. Output pixel `i` samples source coordinate
/// `(i + 0.5 - H/2) / factor + H/2 - 0.5`, clamped to the image.
pub fn rescale_and_crop(image: &Tensor<f64>, factor: f64) -> Result<Tensor<f64>, FreqProbeError> {
    if !(factor.is_finite() && factor >= 1.0) {
        return Err(FreqProbeError::Factor(factor));
    }
    if factor == 1.0 {
        return Ok(image.clone());
    }
    let [n, c, h, w] = image.shape();
    let source = |i: usize, len: usize| -> (usize, usize, f64) {
        let half = len as f64 / 2.0;
        let s = ((i as f64 + 0.5 - half) / factor + half - 0.5).clamp(0.0, (len - 1) as f64);
        let lo = s.floor() as usize;
        (lo, (lo + 1).min(len - 1), s - lo as f64)
    };
    let ys: Vec<_> = (0..h).map(|i| source(i, h)).collect();
    let xs: Vec<_> = (0..w).map(|j| source(j, w)).collect();
    let mut out = Tensor::zeros(image.shape());
    for i in 0..n {
        for ch in 0..c {
            let src = image.plane(i, ch);
            let dst = out.plane_mut(i, ch);
            for (y, &(y0, y1, ty)) in ys.iter().enumerate() {
                for (x, &(x0, x1, tx)) in xs.iter().enumerate() {
                    let top = lerp(src[y0 * w + x0], src[y0 * w + x1], tx);
                    let bottom = lerp(src[y1 * w + x0], src[y1 * w + x1], tx);
                    dst[y * w + x] = lerp(top, bottom, ty);
                }
            }
        }
    }
    Ok(out)
}
