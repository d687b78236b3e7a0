/// Low-pass radius bucket. Thresholds 7, 28 and 56 are defined for a
/// 224-pixel side and scale linearly with resolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FrequencyBand {
    UltraLow,
    Low,
    Medium,
    High,
}

pub const REFERENCE_SIDE: f64 = 224.0;
pub const BAND_THRESHOLDS: [f64; 3] = [7.0, 28.0, 56.0];

/// Band edges rescaled to an image of side `image_side`.
pub fn band_thresholds(image_side: usize) -> [f64; 3] {
    let s = image_side as f64 / REFERENCE_SIDE;
    BAND_THRESHOLDS.map(|t| t * s)
}

/// Half-open intervals `[lo, hi)`.
pub fn band_of(radius: f64, image_side: usize) -> FrequencyBand {
    let [a, b, c] = band_thresholds(image_side);
    if radius < a {
        FrequencyBand::UltraLow
    } else if radius < b {
        FrequencyBand::Low
    } else if radius < c {
        FrequencyBand::Medium
    } else {
        FrequencyBand::High
    }
}
