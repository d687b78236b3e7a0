use crate::ndtensor::Scalar;

use super::ScaleSpaceError;

/// Kernels are truncated at `ceil(TRUNCATE_SIGMAS * sigma)` pixels.
pub const TRUNCATE_SIGMAS: f64 = 5.0;

pub fn auto_radius(sigma: f64) -> usize {
    ((TRUNCATE_SIGMAS * sigma).ceil() as usize).max(1)
}

fn check_sigma(sigma: f64) -> Result<(), ScaleSpaceError> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(())
    } else {
        Err(ScaleSpaceError::InvalidSigma(sigma))
    }
}

/// Sampled 2-D Gaussian renormalized to unit sum.
///
/// Row-major `(2r+1) x (2r+1)` grid, rows indexed by `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianKernel {
    sigma: f64,
    radius: usize,
    weights: Vec<f64>,
    taps: Vec<f64>,
}

impl GaussianKernel {
    pub fn new(sigma: f64, radius: Option<usize>) -> Result<Self, ScaleSpaceError> {
        check_sigma(sigma)?;
        let radius = radius.unwrap_or_else(|| auto_radius(sigma));
        let r = radius as isize;
        let inv = 1.0 / (2.0 * sigma * sigma);
        let mut weights = Vec::with_capacity((2 * radius + 1).pow(2));
        for y in -r..=r {
            for x in -r..=r {
                weights.push((-((x * x + y * y) as f64) * inv).exp());
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self { sigma, radius, weights, taps: gaussian_taps(sigma, radius) })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Scale parameter `s = sigma^2`.
    pub fn scale(&self) -> f64 {
        self.sigma * self.sigma
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `weights[y][x]` with offsets in `[-radius, radius]`.
    pub fn at(&self, y: isize, x: isize) -> f64 {
        let r = self.radius as isize;
        self.weights[((y + r) as usize) * self.side() + (x + r) as usize]
    }

    /// Unit-sum 1-D profile; the 2-D kernel is its outer product up to rounding.
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }
}

pub fn gaussian_kernel(sigma: f64, radius: Option<usize>) -> Result<GaussianKernel, ScaleSpaceError> {
    GaussianKernel::new(sigma, radius)
}

/// Unit-sum sampled 1-D Gaussian of length `2 * radius + 1`.
pub fn gaussian_taps(sigma: f64, radius: usize) -> Vec<f64> {
    let r = radius as isize;
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut taps: Vec<f64> = (-r..=r).map(|x| (-((x * x) as f64) * inv).exp()).collect();
    let total: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= total);
    taps
}

/// Partial-derivative order `(m, n)`: `m` along x, `n` along y.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DerivativeOrder {
    pub m: usize,
    pub n: usize,
}

impl DerivativeOrder {
    pub const X: Self = Self { m: 1, n: 0 };
    pub const Y: Self = Self { m: 0, n: 1 };
    pub const XX: Self = Self { m: 2, n: 0 };
    pub const XY: Self = Self { m: 1, n: 1 };
    pub const YY: Self = Self { m: 0, n: 2 };
    pub const ALL: [Self; 5] = [Self::X, Self::Y, Self::XX, Self::XY, Self::YY];

    pub fn new(m: usize, n: usize) -> Result<Self, ScaleSpaceError> {
        if (1..=2).contains(&(m + n)) {
            Ok(Self { m, n })
        } else {
            Err(ScaleSpaceError::UnsupportedOrder { m, n })
        }
    }

    pub fn total(self) -> usize {
        self.m + self.n
    }

    pub fn label(self) -> &'static str {
        match (self.m, self.n) {
            (1, 0) => "dx",
            (0, 1) => "dy",
            (2, 0) => "dxx",
            (1, 1) => "dxy",
            (0, 2) => "dyy",
            _ => unreachable!("validated order"),
        }
    }
}

/// Sampled Gaussian derivative `d^(m+n) g / dx^m dy^n` with exact zero sum.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeOperator {
    sigma: f64,
    order: DerivativeOrder,
    radius: usize,
    weights: Vec<f64>,
}

/// Hermite factor of the 1-D Gaussian derivative of order `k`.
fn hermite_factor(k: usize, x: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    match k {
        0 => 1.0,
        1 => -x / s2,
        2 => (x * x - s2) / (s2 * s2),
        _ => unreachable!("orders above 2 are rejected"),
    }
}

impl DerivativeOperator {
    pub fn new(sigma: f64, m: usize, n: usize) -> Result<Self, ScaleSpaceError> {
        Self::with_radius(sigma, m, n, None)
    }

    pub fn with_radius(sigma: f64, m: usize, n: usize, radius: Option<usize>) -> Result<Self, ScaleSpaceError> {
        let order = DerivativeOrder::new(m, n)?;
        let g = GaussianKernel::new(sigma, radius)?;
        let radius = g.radius();
        let r = radius as isize;
        let side = g.side();
        let mut weights = Vec::with_capacity(side * side);
        for y in -r..=r {
            for x in -r..=r {
                let p = hermite_factor(m, x as f64, sigma) * hermite_factor(n, y as f64, sigma);
                weights.push(p * g.at(y, x));
            }
        }
        if m.is_multiple_of(2) && n.is_multiple_of(2) {
            let mean = weights.iter().sum::<f64>() / weights.len() as f64;
            weights.iter_mut().for_each(|w| *w -= mean);
        }
        enforce_parity(&mut weights, side, m % 2 == 1, n % 2 == 1);
        enforce_zero_sum(&mut weights, side);
        Ok(Self { sigma, order, radius, weights })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn order(&self) -> DerivativeOrder {
        self.order
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn at(&self, y: isize, x: isize) -> f64 {
        let r = self.radius as isize;
        self.weights[((y + r) as usize) * self.side() + (x + r) as usize]
    }
}

pub fn derivative_kernel(sigma: f64, m: usize, n: usize) -> Result<DerivativeOperator, ScaleSpaceError> {
    DerivativeOperator::new(sigma, m, n)
}

impl DerivativeOperator {
    /// Weights rounded for precision `T` such that their sum is still exactly
    /// zero when accumulated in `T`.
    pub fn weights_as<T: Scalar>(&self) -> Vec<T> {
        let mut w = self.weights.clone();
        enforce_zero_sum_for(&mut w, self.side(), mantissa_bits::<T>());
        w.into_iter().map(T::from_f64_lossy).collect()
    }
}

fn mantissa_bits<T: Scalar>() -> i32 {
    1 - T::epsilon().as_f64().log2().round() as i32
}

/// Makes the grid exactly (anti)symmetric under `x -> -x` and `y -> -y`.
/// Exact parity zeroes the first moments, so linear ramps are annihilated
/// by every even-order kernel.
fn enforce_parity(w: &mut [f64], side: usize, odd_x: bool, odd_y: bool) {
    let sx = if odd_x { -1.0 } else { 1.0 };
    let sy = if odd_y { -1.0 } else { 1.0 };
    let last = side - 1;
    let src = w.to_vec();
    for y in 0..side {
        for x in 0..side {
            let v = src[y * side + x]
                + sx * src[y * side + (last - x)]
                + sy * src[(last - y) * side + x]
                + sx * sy * src[(last - y) * side + (last - x)];
            w[y * side + x] = 0.25 * v;
        }
    }
}

/// Rounds every weight to a common power-of-two quantum and absorbs the
/// residual into the centre tap. All partial sums of the result are exact,
/// so the total is zero in any summation order.
fn enforce_zero_sum(w: &mut [f64], side: usize) {
    enforce_zero_sum_for(w, side, 53);
}

/// `bits` is the significand width of the accumulation type; three bits of
/// headroom keep every partial sum representable.
fn enforce_zero_sum_for(w: &mut [f64], side: usize, bits: i32) {
    let mass: f64 = w.iter().map(|v| v.abs()).sum();
    if mass == 0.0 {
        return;
    }
    let quantum = 2f64.powi(mass.log2().ceil() as i32 - (bits - 3));
    for v in w.iter_mut() {
        *v = (*v / quantum).round() * quantum;
    }
    let residual: f64 = w.iter().sum();
    let centre = (side / 2) * side + side / 2;
    w[centre] -= residual;
}
