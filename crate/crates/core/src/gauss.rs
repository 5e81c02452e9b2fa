//! Gaussian kernel helpers shared by the marginal and conditional estimators.

use std::f64::consts::PI;

/// `1 / sqrt(2 pi)`.
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Squared standardized distance beyond which a Gaussian term is dropped.
/// `exp(-40.5)` is below `3e-18` of the peak value.
pub(crate) const CUTOFF_Z: f64 = 9.0;

/// L1 norm of the standard Gaussian kernel.
pub const KERNEL_L1: f64 = 1.0;

/// L2 norm of the univariate standard Gaussian kernel, `(2 sqrt(pi))^{-1/2}`.
pub fn kernel_l2_1d() -> f64 {
    (2.0 * PI.sqrt()).powf(-0.5)
}

/// L2 norm of the product Gaussian kernel on the plane, `1 / (2 sqrt(pi))`.
pub fn kernel_l2_2d() -> f64 {
    1.0 / (2.0 * PI.sqrt())
}

/// Standard normal density.
#[inline]
pub fn std_normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Density of `N(0, scale^2)` at `u`.
#[inline]
pub fn normal_pdf(u: f64, scale: f64) -> f64 {
    std_normal_pdf(u / scale) / scale
}

/// Density of `N(mean, variance)` at `u`.
#[inline]
pub fn normal_pdf_var(u: f64, mean: f64, variance: f64) -> f64 {
    normal_pdf(u - mean, variance.sqrt())
}

/// Weighted Gaussian mixture `t -> sum_i w_i phi_s(t - c_i)` with a common
/// scale. Centers are kept sorted so evaluation only visits the window of
/// centers that contribute above the cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedMixture {
    centers: Vec<f64>,
    weights: Vec<f64>,
    scale: f64,
}

impl SortedMixture {
    pub fn new(centers: &[f64], weights: &[f64], scale: f64) -> Self {
        let mut order: Vec<usize> = (0..centers.len()).collect();
        order.sort_by(|&a, &b| centers[a].total_cmp(&centers[b]));
        Self {
            centers: order.iter().map(|&i| centers[i]).collect(),
            weights: order.iter().map(|&i| weights[i]).collect(),
            scale,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let reach = CUTOFF_Z * self.scale;
        let lo = self.centers.partition_point(|&c| c < t - reach);
        let hi = self.centers.partition_point(|&c| c <= t + reach);
        let inv = 1.0 / self.scale;
        let mut acc = 0.0;
        for i in lo..hi {
            acc += self.weights[i] * std_normal_pdf((t - self.centers[i]) * inv);
        }
        acc * inv
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}
