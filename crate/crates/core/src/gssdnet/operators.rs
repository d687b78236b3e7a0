use crate::ndtensor::{Scalar, Tensor};
use crate::scalespace::{auto_radius, DerivativeOperator, GaussianKernel, ScaleSpaceError};

use super::config::DerivativeOrders;

/// Fixed spatial operator applied to one filtered channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OperatorKind {
    Blur,
    Dx,
    Dy,
    Dxx,
    Dxy,
    Dyy,
}

pub const ALL_OPERATORS: [OperatorKind; 6] =
    [OperatorKind::Blur, OperatorKind::Dx, OperatorKind::Dy, OperatorKind::Dxx, OperatorKind::Dxy, OperatorKind::Dyy];

impl OperatorKind {
    /// `(m, n)` derivative order, `None` for the plain blur.
    pub fn order(self) -> Option<(usize, usize)> {
        match self {
            OperatorKind::Blur => None,
            OperatorKind::Dx => Some((1, 0)),
            OperatorKind::Dy => Some((0, 1)),
            OperatorKind::Dxx => Some((2, 0)),
            OperatorKind::Dxy => Some((1, 1)),
            OperatorKind::Dyy => Some((0, 2)),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            OperatorKind::Blur => "blur",
            OperatorKind::Dx => "dx",
            OperatorKind::Dy => "dy",
            OperatorKind::Dxx => "dxx",
            OperatorKind::Dxy => "dxy",
            OperatorKind::Dyy => "dyy",
        }
    }

    /// Row-major `(2r+1)^2` convolution weights in precision `T`.
    pub fn weights<T: Scalar>(self, sigma: f64) -> Result<Vec<T>, ScaleSpaceError> {
        match self.order() {
            None => Ok(GaussianKernel::new(sigma, None)?.weights().iter().map(|&v| T::from_f64_lossy(v)).collect()),
            Some((m, n)) => Ok(DerivativeOperator::new(sigma, m, n)?.weights_as::<T>()),
        }
    }
}

pub fn operator_set(orders: DerivativeOrders) -> &'static [OperatorKind] {
    match orders {
        DerivativeOrders::First => &ALL_OPERATORS[..3],
        DerivativeOrders::Second => &ALL_OPERATORS,
    }
}

/// Operator for filtered channel `channel`: cyclic over the set.
pub fn assign_operator(channel: usize, set: &[OperatorKind]) -> OperatorKind {
    set[channel % set.len()]
}

/// `(channels, 1, k, k)` bank, one kernel per filtered channel.
pub fn kernel_bank<T: Scalar>(
    channels: usize,
    orders: DerivativeOrders,
    sigma: f64,
) -> Result<Tensor<T>, ScaleSpaceError> {
    let set = operator_set(orders);
    let side = 2 * auto_radius(sigma) + 1;
    let per_op: Vec<Vec<T>> = set.iter().map(|op| op.weights::<T>(sigma)).collect::<Result<_, _>>()?;
    let mut data = Vec::with_capacity(channels * side * side);
    for c in 0..channels {
        data.extend_from_slice(&per_op[c % set.len()]);
    }
    Ok(Tensor::new([channels, 1, side, side], data).expect("bank extents"))
}
