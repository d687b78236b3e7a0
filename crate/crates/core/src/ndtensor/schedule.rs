use std::f64::consts::PI;

use super::TensorError;

/// Linear warmup followed by half-cosine decay, evaluated per epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LrSchedule {
    pub base_lr: f64,
    pub warmup_epochs: usize,
    pub total_epochs: usize,
}

impl LrSchedule {
    /// `warmup_epochs` may be zero (pure cosine) but must stay below
    /// `total_epochs`.
    pub fn new(base_lr: f64, warmup_epochs: usize, total_epochs: usize) -> Result<Self, TensorError> {
        if !(base_lr.is_finite() && base_lr >= 0.0) {
            return Err(TensorError::InvalidArgument(format!("base learning rate {base_lr} must be finite and >= 0")));
        }
        if total_epochs == 0 || warmup_epochs >= total_epochs {
            return Err(TensorError::InvalidArgument(format!(
                "warmup epochs ({warmup_epochs}) must be below total epochs ({total_epochs})"
            )));
        }
        Ok(Self { base_lr, warmup_epochs, total_epochs })
    }

    pub fn lr_at(&self, epoch: usize) -> Result<f64, TensorError> {
        if epoch >= self.total_epochs {
            return Err(TensorError::EpochOutOfRange { epoch, total: self.total_epochs });
        }
        if epoch < self.warmup_epochs {
            return Ok(self.base_lr * (epoch + 1) as f64 / self.warmup_epochs as f64);
        }
        let progress = (epoch - self.warmup_epochs) as f64 / (self.total_epochs - self.warmup_epochs) as f64;
        Ok(self.base_lr * 0.5 * (1.0 + (PI * progress).cos()))
    }
}
