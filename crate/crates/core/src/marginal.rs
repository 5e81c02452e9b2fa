//! Pointwise Goldenshluger-Lepski estimate of the design density from the
//! marginal half of the sample, and the neighborhood statistics that scale
//! the conditional penalties.

use crate::error::{ensure, Error, Result};
use crate::gauss::{kernel_l2_1d, SortedMixture, KERNEL_L1};
use crate::sampling::Example;
use crate::selection::{self, SelectionTrace};
use serde::Serialize;

/// Shrinking rate `k_n` of the neighborhood `V_n(x) = [x - 2A/k_n, x + 2A/k_n]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum NeighborhoodRate {
    /// `k_n = max(log n, 1)`.
    LogN,
    Fixed(f64),
}

impl NeighborhoodRate {
    pub fn k_n(self, n: usize) -> f64 {
        match self {
            NeighborhoodRate::LogN => (n as f64).ln().max(1.0),
            NeighborhoodRate::Fixed(k) => k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalConfig {
    pub grid_size: usize,
    pub tuning_constant: f64,
    /// `A` in the neighborhood half-width `2A / k_n`.
    pub neighborhood_halfwidth_a: f64,
    pub k_n: NeighborhoodRate,
    pub neighborhood_grid_points: usize,
    /// Lower clamp of `delta_hat`; `None` means `1/n`.
    pub delta_floor: Option<f64>,
}

impl Default for MarginalConfig {
    fn default() -> Self {
        Self {
            grid_size: 10,
            tuning_constant: 2.2,
            neighborhood_halfwidth_a: 0.25,
            k_n: NeighborhoodRate::LogN,
            neighborhood_grid_points: 21,
            delta_floor: None,
        }
    }
}

impl MarginalConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.grid_size >= 1, Configuration, "grid_size must be positive");
        ensure!(self.tuning_constant > 0.0, Configuration, "tuning constant must be positive");
        ensure!(
            self.neighborhood_halfwidth_a > 0.0,
            Configuration,
            "neighborhood A must be positive"
        );
        ensure!(
            self.neighborhood_grid_points >= 1,
            Configuration,
            "neighborhood grid needs at least one point"
        );
        if let NeighborhoodRate::Fixed(k) = self.k_n {
            ensure!(k >= 1.0, Configuration, "k_n must be at least 1, got {k}");
        }
        if let Some(f) = self.delta_floor {
            ensure!(f > 0.0, Configuration, "delta floor must be positive");
        }
        Ok(())
    }

    pub fn floor(&self, n: usize) -> f64 {
        self.delta_floor.unwrap_or(1.0 / n as f64)
    }

    /// Uniform evaluation grid over `V_n(x)`.
    pub fn neighborhood(&self, x: f64, n: usize) -> Vec<f64> {
        let half = 2.0 * self.neighborhood_halfwidth_a / self.k_n.k_n(n);
        let m = self.neighborhood_grid_points;
        if m == 1 {
            return vec![x];
        }
        (0..m)
            .map(|i| x - half + 2.0 * half * i as f64 / (m - 1) as f64)
            .collect()
    }
}

/// The design density used by the conditional estimators.
#[derive(Debug, Clone, PartialEq)]
pub enum DesignDensity {
    /// Gaussian kernel estimate with the selected bandwidth.
    Kernel(SortedMixture),
    /// The true design density of a simulation example.
    Oracle(Example),
    /// A constant value, for hand-built fixtures.
    Constant(f64),
}

impl DesignDensity {
    pub fn evaluate(&self, t: f64) -> f64 {
        match self {
            DesignDensity::Kernel(m) => m.eval(t),
            DesignDensity::Oracle(ex) => ex.marginal_density(t),
            DesignDensity::Constant(c) => *c,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalEstimate {
    /// `h_0`; `None` when the true density is used.
    pub selected_bandwidth: Option<f64>,
    pub pilot_bandwidth: Option<f64>,
    pub density: DesignDensity,
    /// Lower clamp applied to `delta_hat` and to design-density values used
    /// as divisors.
    pub floor: f64,
    pub delta_hat: f64,
    pub sup_hat: f64,
    pub trace: Option<SelectionTrace<f64>>,
}

impl MarginalEstimate {
    pub fn evaluate(&self, t: f64) -> f64 {
        self.density.evaluate(t)
    }

    /// `f_X(t)` clamped below by the floor, for use as a divisor.
    pub fn evaluate_clamped(&self, t: f64) -> f64 {
        self.evaluate(t).max(self.floor)
    }

    /// A fixed density (e.g. a constant) for hand-built test fixtures.
    pub fn from_parts(density: DesignDensity, delta_hat: f64, sup_hat: f64, floor: f64) -> Self {
        Self {
            selected_bandwidth: None,
            pilot_bandwidth: None,
            density,
            floor,
            delta_hat,
            sup_hat,
            trace: None,
        }
    }
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Silverman's rule `1.06 min(sd, IQR / 1.34) n^{-1/5}`. Falls back to the
/// standard deviation when the interquartile range vanishes.
pub fn rule_of_thumb_bandwidth(xs: &[f64]) -> Result<f64> {
    ensure!(xs.len() >= 2, Estimation, "need at least two points, got {}", xs.len());
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    ensure!(sd > 0.0 && sd.is_finite(), Estimation, "sample has zero spread");
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    Ok(1.06 * spread * n.powf(-0.2))
}

/// `pen(n, h) = c ||K||_2 (1 + ||K||_1) sqrt(|log h| pilot / (n h))`.
pub fn marginal_penalty(n: usize, h: f64, pilot_density: f64, tuning_constant: f64) -> f64 {
    tuning_constant
        * kernel_l2_1d()
        * (1.0 + KERNEL_L1)
        * (h.ln().abs() * pilot_density.max(0.0) / (n as f64 * h)).sqrt()
}

/// Geometric grid of `size` bandwidths over `[pilot/4, 4 pilot]`.
pub fn marginal_grid(pilot: f64, size: usize) -> Vec<f64> {
    if size == 1 {
        return vec![pilot];
    }
    let (lo, hi) = (pilot / 4.0, 4.0 * pilot);
    let ratio = (hi / lo).ln() / (size - 1) as f64;
    (0..size).map(|i| lo * (ratio * i as f64).exp()).collect()
}

fn kde_at(xs: &[f64], h: f64) -> SortedMixture {
    let w = vec![1.0 / xs.len() as f64; xs.len()];
    SortedMixture::new(xs, &w, h)
}

fn neighborhood_stats(eval: impl Fn(f64) -> f64, grid: &[f64], floor: f64) -> (f64, f64) {
    let vals: Vec<f64> = grid.iter().map(|&t| eval(t).abs()).collect();
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let max = vals.iter().copied().fold(0.0, f64::max);
    let delta = min.max(floor);
    (delta, max.max(delta))
}

/// Selects `h_0` at `x` on the default grid around the rule-of-thumb pilot.
pub fn gl_select_marginal(xs: &[f64], x: f64, cfg: &MarginalConfig) -> Result<MarginalEstimate> {
    cfg.validate()?;
    let pilot = rule_of_thumb_bandwidth(xs)?;
    let grid = marginal_grid(pilot, cfg.grid_size);
    select_with_pilot(xs, x, &grid, pilot, cfg)
}

/// Same rule on an explicit bandwidth grid.
pub fn gl_select_marginal_on_grid(
    xs: &[f64],
    x: f64,
    grid: &[f64],
    cfg: &MarginalConfig,
) -> Result<MarginalEstimate> {
    cfg.validate()?;
    let pilot = rule_of_thumb_bandwidth(xs)?;
    select_with_pilot(xs, x, grid, pilot, cfg)
}

fn select_with_pilot(
    xs: &[f64],
    x: f64,
    grid: &[f64],
    pilot: f64,
    cfg: &MarginalConfig,
) -> Result<MarginalEstimate> {
    ensure!(!grid.is_empty(), Configuration, "empty bandwidth grid");
    ensure!(
        grid.iter().all(|&h| h > 0.0 && h.is_finite()),
        Configuration,
        "bandwidths must be positive"
    );
    let n = xs.len();
    let pilot_at_x = kde_at(xs, pilot).eval(x);
    let single: Vec<f64> = grid.iter().map(|&h| kde_at(xs, h).eval(x)).collect();
    let pen: Vec<f64> = grid
        .iter()
        .map(|&h| marginal_penalty(n, h, pilot_at_x, cfg.tuning_constant))
        .collect();
    let k = grid.len();
    let mut double = vec![0.0; k * k];
    for i in 0..k {
        for j in i..k {
            let v = kde_at(xs, grid[i].hypot(grid[j])).eval(x);
            double[i * k + j] = v;
            double[j * k + i] = v;
        }
    }
    let trace = selection::select(
        grid.to_vec(),
        pen,
        |m, mp| (double[m * k + mp] - single[mp]).abs(),
        // ties toward the largest bandwidth
        |a: &f64, b: &f64| b.total_cmp(a),
    );
    let h0 = *trace.chosen();
    let density = DesignDensity::Kernel(kde_at(xs, h0));
    let floor = cfg.floor(n);
    let (delta_hat, sup_hat) =
        neighborhood_stats(|t| density.evaluate(t), &cfg.neighborhood(x, n), floor);
    Ok(MarginalEstimate {
        selected_bandwidth: Some(h0),
        pilot_bandwidth: Some(pilot),
        density,
        floor,
        delta_hat,
        sup_hat,
        trace: Some(trace),
    })
}

/// Wraps the true design density of `example`, with the neighborhood
/// statistics computed on the same grid as the estimated version. `n` sizes
/// the neighborhood and the floor.
pub fn oracle_marginal(
    example: impl Into<Example>,
    x: f64,
    n: usize,
    cfg: &MarginalConfig,
) -> Result<MarginalEstimate> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::Argument("n must be positive".into()));
    }
    let density = DesignDensity::Oracle(example.into());
    let floor = cfg.floor(n);
    let (delta_hat, sup_hat) =
        neighborhood_stats(|t| density.evaluate(t), &cfg.neighborhood(x, n), floor);
    Ok(MarginalEstimate {
        selected_bandwidth: None,
        pilot_bandwidth: None,
        density,
        floor,
        delta_hat,
        sup_hat,
        trace: None,
    })
}
