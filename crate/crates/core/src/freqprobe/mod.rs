//! Ideal spectral filtering and accuracy-versus-radius sensitivity curves.

mod bands;
mod export;
mod resample;
mod spectrum;
mod sweep;
pub mod synthetic;

use thiserror::Error;

pub use bands::{band_of, band_thresholds, FrequencyBand, BAND_THRESHOLDS, REFERENCE_SIDE};
pub use export::{
    curve_svg, format_radius, write_curves_csv, write_predictions_csv, write_scale_summary_csv, CURVE_HEADER,
};
pub use resample::rescale_and_crop;
pub use spectrum::{
    apply_filter, bin_distance, dft2, idft2, max_distance, Fft2, IdealFilter, PassType, Spectrum, IMAG_RESIDUE_LIMIT,
};
pub use sweep::{
    curves_from_outcome, half_max_radius, parse_radii, scale_probe, sensitivity_sweep, sweep_predictions,
    validate_radii, Classifier, CurvePoint, LabeledImages, Level, ScalePoint, SensitivityCurve, SweepOptions,
    SweepOutcome,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FreqProbeError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("{images} images but {labels} labels")]
    LabelCount { images: usize, labels: usize },
    #[error("invalid radii: {0}")]
    Radii(String),
    #[error("rescale factor must be >= 1, got {0}")]
    Factor(f64),
    #[error("half-max radius undefined: {0}")]
    UndefinedHalfMax(String),
    #[error("inverse transform left imaginary residue {0:e}")]
    ImaginaryResidue(f64),
}
