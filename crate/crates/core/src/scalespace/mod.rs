//! Sampled Gaussian kernels, Gaussian-derivative operators and scale-space
//! construction.

mod filter;
mod kernels;
mod space;

use std::fmt::Write as _;

use thiserror::Error;

pub use filter::{
    apply_operator, blur, convolve_2d, convolve_separable, convolve_separable_adjoint, derivative, Padding,
};
pub use kernels::{
    auto_radius, derivative_kernel, gaussian_kernel, gaussian_taps, DerivativeOperator, DerivativeOrder,
    GaussianKernel, TRUNCATE_SIGMAS,
};
pub use space::{build_scale_space, ScaleLevel, ScaleSpace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScaleSpaceError {
    #[error("sigma must be finite and positive, got {0}")]
    InvalidSigma(f64),
    #[error("unsupported derivative order ({m}, {n}); supported: (1,0) (0,1) (2,0) (1,1) (0,2)")]
    UnsupportedOrder { m: usize, n: usize },
    #[error("sigma #{index} = {sigma} does not exceed the previous scale {previous}")]
    NonIncreasingSigmas { index: usize, sigma: f64, previous: f64 },
}

/// Row-per-line text rendering with 17 significant digits, enough to
/// round-trip every `f64` weight.
pub fn format_weights(weights: &[f64], side: usize) -> String {
    let mut out = String::new();
    for row in weights.chunks(side) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        let _ = writeln!(out, "{}", cells.join(" "));
    }
    out
}
