//! Integrated squared error against the true conditional densities and the
//! Monte Carlo risk harness.

use crate::error::{ensure, Error, Result};
use crate::kernel_gl::{build_bandwidth_grid, GridMode, GridOptions, KernelCurve, KernelGlTable};
use crate::marginal::{gl_select_marginal, oracle_marginal, MarginalConfig, MarginalEstimate};
use crate::projection_gl::{
    build_model_grid, fit_projection, gl_select_model, BasisSpec, ModelGridOptions, ModelIndex,
    PenaltyForm, ProjectionFit,
};
use crate::quadrature::simpson_piecewise;
use crate::sampling::{generate, Example, ObservationSet};
use crate::selection::SelectionTrace;
use crate::kernel_gl::Bandwidth2;
use rayon::prelude::*;
use serde::Serialize;
use std::cell::Cell;
use std::fmt;
use std::str::FromStr;

/// A function of `y` at a fixed `x`, with hints for quadrature.
pub trait YCurve {
    fn eval(&self, y: f64) -> f64;

    /// Interval outside which the curve vanishes, if bounded.
    fn support(&self) -> Option<(f64, f64)> {
        None
    }

    /// Points where the curve may jump or kink.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Smallest length scale of the curve, if any.
    fn resolution(&self) -> Option<f64> {
        None
    }
}

impl YCurve for KernelCurve {
    fn eval(&self, y: f64) -> f64 {
        self.evaluate(y)
    }

    fn support(&self) -> Option<(f64, f64)> {
        Some(KernelCurve::support(self))
    }

    fn resolution(&self) -> Option<f64> {
        Some(self.y_scale())
    }
}

impl YCurve for ProjectionFit {
    fn eval(&self, y: f64) -> f64 {
        self.evaluate(y)
    }

    fn support(&self) -> Option<(f64, f64)> {
        Some(ProjectionFit::support(self))
    }

    fn breakpoints(&self) -> Vec<f64> {
        ProjectionFit::breakpoints(self)
    }
}

/// Wraps a closure as an unbounded smooth curve.
pub struct FnCurve<F>(pub F);

impl<F: Fn(f64) -> f64> YCurve for FnCurve<F> {
    fn eval(&self, y: f64) -> f64 {
        (self.0)(y)
    }
}

/// `max(f, 0)` of an inner curve.
pub struct Clamped<'a, C: ?Sized>(pub &'a C);

impl<C: YCurve + ?Sized> YCurve for Clamped<'_, C> {
    fn eval(&self, y: f64) -> f64 {
        self.0.eval(y).max(0.0)
    }

    fn support(&self) -> Option<(f64, f64)> {
        self.0.support()
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.0.breakpoints()
    }

    fn resolution(&self) -> Option<f64> {
        self.0.resolution()
    }
}

/// Simpson steps per unit of [`YCurve::resolution`].
const STEPS_PER_SCALE: f64 = 4.0;
const MAX_INTERVALS: usize = 1 << 22;

/// `int (curve(y) - f(x, y))^2 dy` by piecewise composite Simpson over the
/// padded support of `f(x, .)` joined with the curve's own support.
pub fn mse<C: YCurve + ?Sized>(
    curve: &C,
    example: impl Into<Example>,
    x: f64,
    quadrature_points: usize,
) -> Result<f64> {
    let example = example.into();
    ensure!(
        quadrature_points >= 64 && quadrature_points.is_multiple_of(2),
        Argument,
        "quadrature_points must be even and >= 64, got {quadrature_points}"
    );
    let ((mut lo, mut hi), mut knots) = example.conditional_support(x)?;
    if let Some((a, b)) = curve.support() {
        lo = lo.min(a);
        hi = hi.max(b);
    }
    knots.extend(curve.breakpoints());
    if let Some((a, b)) = curve.support() {
        knots.extend([a, b]);
    }
    let mut intervals = quadrature_points;
    if let Some(s) = curve.resolution() {
        let (a, b) = curve.support().unwrap_or((lo, hi));
        let needed = ((b - a) / s * STEPS_PER_SCALE).ceil();
        if needed.is_finite() {
            // intervals are shared by length, so scale up to the whole range
            let total = needed * (hi - lo) / (b - a).max(f64::MIN_POSITIVE);
            intervals = intervals.max(total.min(MAX_INTERVALS as f64) as usize);
        }
    }
    let bad = Cell::new(None);
    let value = simpson_piecewise(
        |y| {
            let g = curve.eval(y);
            if !g.is_finite() {
                bad.set(Some((y, g)));
            }
            let f = example.conditional_density(x, y).unwrap_or(f64::NAN);
            (g - f) * (g - f)
        },
        lo,
        hi,
        &knots,
        intervals,
    );
    if let Some((y, g)) = bad.get() {
        return Err(Error::Evaluation(format!("curve value {g} at y = {y}")));
    }
    ensure!(value.is_finite(), Evaluation, "non-finite squared error");
    Ok(value.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EstimatorKind {
    Kernel,
    Projection,
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorKind::Kernel => "kernel",
            EstimatorKind::Projection => "projection",
        })
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kernel" => Ok(EstimatorKind::Kernel),
            "projection" => Ok(EstimatorKind::Projection),
            _ => Err(Error::Argument(format!(
                "unknown estimator '{s}' (expected kernel or projection)"
            ))),
        }
    }
}

/// Settings shared by both conditional estimators.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorSettings {
    pub marginal: MarginalConfig,
    pub kernel_grid: GridMode,
    /// Model sizes inside the dimension bounds, relaxed per axis when empty.
    pub projection_grid: GridMode,
    /// Bandwidths per axis of the kernel grid.
    pub kernel_grid_size: usize,
    /// Legendre degree in x of the projection bases.
    pub r: usize,
    /// Legendre degree in y of the projection bases.
    pub r_y: usize,
    pub penalty: PenaltyForm,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        Self {
            marginal: MarginalConfig::default(),
            kernel_grid: GridMode::Practical,
            projection_grid: GridMode::Strict,
            kernel_grid_size: 10,
            r: 0,
            r_y: 0,
            penalty: PenaltyForm::Simplified,
        }
    }
}

impl EstimatorSettings {
    pub fn grid_options(&self) -> GridOptions {
        GridOptions {
            per_axis: self.kernel_grid_size,
            mode: self.kernel_grid,
            k_n: self.marginal.k_n,
        }
    }

    pub fn model_grid_options(&self) -> ModelGridOptions {
        ModelGridOptions {
            mode: self.projection_grid,
            k_n: self.marginal.k_n,
        }
    }

    /// Projection bases at `x`; the x-window shares `A` with the marginal
    /// neighborhood.
    pub fn basis(&self, obs: &ObservationSet, x: f64) -> Result<BasisSpec> {
        BasisSpec::from_sample(&obs.ys, x, self.marginal.neighborhood_halfwidth_a, self.r, self.r_y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskConfig {
    #[serde(serialize_with = "display")]
    pub example: Example,
    pub estimator: EstimatorKind,
    pub x: f64,
    pub n: usize,
    pub eta: f64,
    pub fx_known: bool,
    pub replications: usize,
    pub base_seed: u64,
    pub quadrature_points: usize,
    pub clamp_nonneg: bool,
    pub settings: EstimatorSettings,
}

fn display<T: fmt::Display, S: serde::Serializer>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

impl RiskConfig {
    pub fn new(example: impl Into<Example>, estimator: EstimatorKind, x: f64, n: usize, eta: f64) -> Self {
        Self {
            example: example.into(),
            estimator,
            x,
            n,
            eta,
            fx_known: false,
            replications: 100,
            base_seed: 0,
            quadrature_points: 2048,
            clamp_nonneg: false,
            settings: EstimatorSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.replications >= 1, Configuration, "need at least one replication");
        ensure!(
            self.quadrature_points >= 64 && self.quadrature_points.is_multiple_of(2),
            Configuration,
            "quadrature_points must be even and >= 64"
        );
        ensure!(self.n >= 8, Configuration, "need n >= 8, got {}", self.n);
        ensure!(self.eta > -1.0, Configuration, "eta must exceed -1, got {}", self.eta);
        ensure!(self.x.is_finite(), Configuration, "x must be finite");
        self.settings.marginal.validate()
    }

    /// Seed of replication `rep` (1-based).
    pub fn seed(&self, rep: usize) -> u64 {
        self.base_seed.wrapping_add(rep as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport {
    pub config: RiskConfig,
    pub mse_mean: f64,
    /// Sample standard deviation over `sqrt(N)`; 0 when `N = 1`.
    pub mse_stderr: f64,
    /// False when `N = 1` and the standard error is undefined.
    pub stderr_defined: bool,
    pub per_replication: Vec<f64>,
}

impl RiskReport {
    pub fn from_values(config: RiskConfig, per_replication: Vec<f64>) -> Self {
        let n = per_replication.len() as f64;
        let mean = per_replication.iter().sum::<f64>() / n;
        let (stderr, defined) = if per_replication.len() > 1 {
            let var = per_replication.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            ((var / n).sqrt(), true)
        } else {
            (0.0, false)
        };
        Self {
            config,
            mse_mean: mean,
            mse_stderr: stderr,
            stderr_defined: defined,
            per_replication,
        }
    }
}

/// The selected estimate of one pipeline pass.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedCurve {
    Kernel(KernelCurve),
    Projection(ProjectionFit),
}

impl YCurve for FittedCurve {
    fn eval(&self, y: f64) -> f64 {
        match self {
            FittedCurve::Kernel(c) => c.evaluate(y),
            FittedCurve::Projection(p) => p.evaluate(y),
        }
    }

    fn support(&self) -> Option<(f64, f64)> {
        match self {
            FittedCurve::Kernel(c) => YCurve::support(c),
            FittedCurve::Projection(p) => YCurve::support(p),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            FittedCurve::Kernel(c) => YCurve::breakpoints(c),
            FittedCurve::Projection(p) => YCurve::breakpoints(p),
        }
    }

    fn resolution(&self) -> Option<f64> {
        match self {
            FittedCurve::Kernel(c) => YCurve::resolution(c),
            FittedCurve::Projection(p) => YCurve::resolution(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Selection {
    Kernel(SelectionTrace<Bandwidth2>),
    Projection(SelectionTrace<ModelIndex>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridReport {
    pub candidates: usize,
    pub mode: GridMode,
    pub relaxed_x: bool,
    pub relaxed_y: bool,
}

/// Everything one pass of the pipeline produces.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub marginal: MarginalEstimate,
    pub curve: FittedCurve,
    pub selection: Selection,
    pub grid: GridReport,
}

/// `f_X` for the conditional estimators: the truth when `fx_known`, else the
/// GL estimate from the marginal half.
pub fn build_marginal(obs: &ObservationSet, cfg: &RiskConfig) -> Result<MarginalEstimate> {
    if cfg.fx_known {
        oracle_marginal(obs.example, cfg.x, obs.n(), &cfg.settings.marginal)
    } else {
        gl_select_marginal(&obs.marginal_xs, cfg.x, &cfg.settings.marginal)
    }
}

/// Marginal estimate, grid, selection and selected curve on one sample.
pub fn estimate(obs: &ObservationSet, cfg: &RiskConfig) -> Result<PipelineOutput> {
    let marginal = build_marginal(obs, cfg)?;
    match cfg.estimator {
        EstimatorKind::Kernel => {
            let grid = build_bandwidth_grid(obs.n(), marginal.delta_hat, &cfg.settings.grid_options())?;
            let table = KernelGlTable::new(obs, &marginal, &grid, cfg.x)?;
            let trace = table.select(cfg.eta)?;
            Ok(PipelineOutput {
                curve: FittedCurve::Kernel(table.curve(trace.chosen_index)),
                selection: Selection::Kernel(trace),
                grid: GridReport {
                    candidates: grid.len(),
                    mode: grid.mode,
                    relaxed_x: grid.relaxed_x,
                    relaxed_y: grid.relaxed_y,
                },
                marginal,
            })
        }
        EstimatorKind::Projection => {
            let spec = cfg.settings.basis(obs, cfg.x)?;
            let grid = build_model_grid(obs.n(), marginal.delta_hat, &spec, &cfg.settings.model_grid_options())?;
            let (fit, trace) =
                gl_select_model(obs, &marginal, &grid, &spec, cfg.x, cfg.eta, cfg.settings.penalty)?;
            Ok(PipelineOutput {
                curve: FittedCurve::Projection(fit),
                selection: Selection::Projection(trace),
                grid: GridReport {
                    candidates: grid.models.len(),
                    mode: grid.mode,
                    relaxed_x: grid.relaxed_x,
                    relaxed_y: grid.relaxed_y,
                },
                marginal,
            })
        }
    }
}

fn curve_mse(curve: &FittedCurve, cfg: &RiskConfig) -> Result<f64> {
    if cfg.clamp_nonneg {
        mse(&Clamped(curve), cfg.example, cfg.x, cfg.quadrature_points)
    } else {
        mse(curve, cfg.example, cfg.x, cfg.quadrature_points)
    }
}

fn replicate<T, F>(cfg: &RiskConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&ObservationSet) -> Result<T> + Sync,
{
    cfg.validate()?;
    (1..=cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let seed = cfg.seed(rep);
            generate(cfg.example, cfg.n, seed)
                .and_then(|obs| f(&obs))
                .map_err(|e| Error::Evaluation(format!("replication {rep} (seed {seed}) failed: {e}")))
        })
        .collect()
}

/// Monte Carlo MSE of one cell. Replication `rep = 1..=N` uses seed
/// `base_seed + rep`; any failed replication aborts the cell.
pub fn run_cell(cfg: &RiskConfig) -> Result<RiskReport> {
    let values = replicate(cfg, |obs| curve_mse(&estimate(obs, cfg)?.curve, cfg))?;
    Ok(RiskReport::from_values(cfg.clone(), values))
}

/// One report per `eta`, sorted ascending by `eta`. Each replication's sample
/// (and, for the kernel rule, its distance table) is shared by every `eta`.
pub fn run_eta_sweep(cfg: &RiskConfig, etas: &[f64]) -> Result<Vec<RiskReport>> {
    ensure!(!etas.is_empty(), Argument, "empty eta list");
    let mut etas = etas.to_vec();
    etas.sort_by(f64::total_cmp);
    for &eta in &etas {
        RiskConfig { eta, ..cfg.clone() }.validate()?;
    }
    let per_rep = replicate(cfg, |obs| {
        let marginal = build_marginal(obs, cfg)?;
        match cfg.estimator {
            EstimatorKind::Kernel => {
                let grid =
                    build_bandwidth_grid(obs.n(), marginal.delta_hat, &cfg.settings.grid_options())?;
                let table = KernelGlTable::new(obs, &marginal, &grid, cfg.x)?;
                etas.iter()
                    .map(|&eta| {
                        let k = table.select(eta)?.chosen_index;
                        curve_mse(&FittedCurve::Kernel(table.curve(k)), cfg)
                    })
                    .collect::<Result<Vec<_>>>()
            }
            EstimatorKind::Projection => {
                let spec = cfg.settings.basis(obs, cfg.x)?;
                let grid = build_model_grid(
                    obs.n(),
                    marginal.delta_hat,
                    &spec,
                    &cfg.settings.model_grid_options(),
                )?;
                etas.iter()
                    .map(|&eta| {
                        let (fit, _) =
                            gl_select_model(obs, &marginal, &grid, &spec, cfg.x, eta, cfg.settings.penalty)?;
                        curve_mse(&FittedCurve::Projection(fit), cfg)
                    })
                    .collect::<Result<Vec<_>>>()
            }
        }
    })?;
    Ok(etas
        .iter()
        .enumerate()
        .map(|(j, &eta)| {
            let values = per_rep.iter().map(|v| v[j]).collect();
            RiskReport::from_values(RiskConfig { eta, ..cfg.clone() }, values)
        })
        .collect())
}

fn ratio(selected: f64, best: f64) -> f64 {
    if best > 0.0 {
        selected / best
    } else if selected > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

/// Per-replication `MSE(selected) / min_candidate MSE(candidate)`.
pub fn oracle_ratios(cfg: &RiskConfig) -> Result<Vec<f64>> {
    replicate(cfg, |obs| {
        let marginal = build_marginal(obs, cfg)?;
        match cfg.estimator {
            EstimatorKind::Kernel => {
                let grid =
                    build_bandwidth_grid(obs.n(), marginal.delta_hat, &cfg.settings.grid_options())?;
                let table = KernelGlTable::new(obs, &marginal, &grid, cfg.x)?;
                let chosen = table.select(cfg.eta)?.chosen_index;
                let risks = (0..grid.len())
                    .map(|k| curve_mse(&FittedCurve::Kernel(table.curve(k)), cfg))
                    .collect::<Result<Vec<_>>>()?;
                let best = risks.iter().copied().fold(f64::INFINITY, f64::min);
                Ok(ratio(risks[chosen], best))
            }
            EstimatorKind::Projection => {
                let spec = cfg.settings.basis(obs, cfg.x)?;
                let grid = build_model_grid(
                    obs.n(),
                    marginal.delta_hat,
                    &spec,
                    &cfg.settings.model_grid_options(),
                )?;
                let (fit, _) =
                    gl_select_model(obs, &marginal, &grid, &spec, cfg.x, cfg.eta, cfg.settings.penalty)?;
                let selected = curve_mse(&FittedCurve::Projection(fit), cfg)?;
                let mut best = f64::INFINITY;
                for &m in &grid.models {
                    let f = fit_projection(obs, m, &spec, cfg.x, marginal.delta_hat, cfg.eta)?;
                    best = best.min(curve_mse(&FittedCurve::Projection(f), cfg)?);
                }
                Ok(ratio(selected, best))
            }
        }
    })
}

/// Median over replications of the selected-to-oracle risk ratio.
pub fn oracle_ratio(cfg: &RiskConfig) -> Result<f64> {
    let mut r = oracle_ratios(cfg)?;
    r.sort_by(f64::total_cmp);
    let m = r.len();
    Ok(if m % 2 == 1 {
        r[m / 2]
    } else {
        0.5 * (r[m / 2 - 1] + r[m / 2])
    })
}
