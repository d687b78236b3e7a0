use crate::ndtensor::{Scalar, Tensor};

use super::filter::{blur, Padding};
use super::ScaleSpaceError;

#[derive(Clone, Debug)]
pub struct ScaleLevel<T> {
    pub sigma: f64,
    pub image: Tensor<T>,
}

/// Gaussian scale-space: the base image at `sigma = 0` plus blurred levels
/// at strictly increasing `sigma`.
#[derive(Clone, Debug)]
pub struct ScaleSpace<T> {
    base: Tensor<T>,
    levels: Vec<ScaleLevel<T>>,
}

impl<T: Scalar> ScaleSpace<T> {
    pub fn base(&self) -> &Tensor<T> {
        &self.base
    }

    pub fn levels(&self) -> &[ScaleLevel<T>] {
        &self.levels
    }

    /// `(sigma, image)` pairs starting with the unmodified input at 0.
    pub fn scales(&self) -> impl Iterator<Item = (f64, &Tensor<T>)> {
        std::iter::once((0.0, &self.base)).chain(self.levels.iter().map(|l| (l.sigma, &l.image)))
    }
}

/// Builds each level from its predecessor with the incremental blur
/// `sqrt(sigma_k^2 - sigma_{k-1}^2)`.
pub fn build_scale_space<T: Scalar>(
    image: &Tensor<T>,
    sigmas: &[f64],
    padding: Padding,
) -> Result<ScaleSpace<T>, ScaleSpaceError> {
    let mut prev_sigma = 0.0f64;
    let mut levels: Vec<ScaleLevel<T>> = Vec::with_capacity(sigmas.len());
    for (i, &sigma) in sigmas.iter().enumerate() {
        if !sigma.is_finite() || sigma <= prev_sigma {
            return Err(ScaleSpaceError::NonIncreasingSigmas { index: i, sigma, previous: prev_sigma });
        }
        let step = (sigma * sigma - prev_sigma * prev_sigma).sqrt();
        let src = levels.last().map_or(image, |l| &l.image);
        let next = blur(src, step, padding)?;
        levels.push(ScaleLevel { sigma, image: next });
        prev_sigma = sigma;
    }
    Ok(ScaleSpace { base: image.clone(), levels })
}
