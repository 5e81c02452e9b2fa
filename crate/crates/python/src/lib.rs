//! Python bindings: sampling, the marginal and conditional estimators, and
//! the Monte Carlo risk harness.

use condens::evaluation::{self, EstimatorSettings, PipelineOutput, Selection, YCurve};
use condens::sampling::{true_conditional_density as truth, true_marginal_density as truth_marginal};
use condens::{
    EstimatorKind, Example, GridMode, MarginalConfig, MarginalEstimate, ObservationSet, PenaltyForm, RiskConfig,
    RiskReport,
};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use pyo3::IntoPyObjectExt;

fn to_py(e: condens::Error) -> PyErr {
    match e {
        condens::Error::Estimation(_) | condens::Error::Evaluation(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_example(name: &str) -> PyResult<Example> {
    name.parse().map_err(to_py)
}

fn parse_estimator(name: &str) -> PyResult<EstimatorKind> {
    name.parse().map_err(to_py)
}

fn settings(strict_grid: bool, penalty: &str, marginal_a: f64) -> PyResult<EstimatorSettings> {
    let mut s = EstimatorSettings::default();
    if strict_grid {
        s.kernel_grid = GridMode::Strict;
        s.projection_grid = GridMode::Strict;
    }
    s.penalty = match penalty {
        "simplified" => PenaltyForm::Simplified,
        "full" => PenaltyForm::Full,
        _ => return Err(PyValueError::new_err(format!("unknown penalty `{penalty}`"))),
    };
    s.marginal.neighborhood_halfwidth_a = marginal_a;
    Ok(s)
}

/// Paired observations `(X_i, Y_i)` plus the independent design half.
#[pyclass(frozen, name = "Sample", module = "condens_py")]
struct PySample {
    inner: ObservationSet,
}

#[pymethods]
impl PySample {
    /// Wraps user data; `example` is only used for truth-based errors.
    #[new]
    #[pyo3(signature = (xs, ys, marginal_xs, example = "ex1"))]
    fn new(xs: Vec<f64>, ys: Vec<f64>, marginal_xs: Vec<f64>, example: &str) -> PyResult<Self> {
        let inner = ObservationSet::from_data(xs, ys, marginal_xs, parse_example(example)?).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn xs(&self) -> Vec<f64> {
        self.inner.xs.clone()
    }

    #[getter]
    fn ys(&self) -> Vec<f64> {
        self.inner.ys.clone()
    }

    #[getter]
    fn marginal_xs(&self) -> Vec<f64> {
        self.inner.marginal_xs.clone()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn example(&self) -> String {
        self.inner.example.to_string()
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!("Sample(example={}, n={}, seed={})", self.inner.example, self.inner.n(), self.inner.seed)
    }
}

/// Design-density estimate at a point, with its local lower and upper bounds.
#[pyclass(frozen, name = "Marginal", module = "condens_py")]
struct PyMarginal {
    inner: MarginalEstimate,
}

#[pymethods]
impl PyMarginal {
    #[getter]
    fn delta_hat(&self) -> f64 {
        self.inner.delta_hat
    }

    #[getter]
    fn sup_hat(&self) -> f64 {
        self.inner.sup_hat
    }

    #[getter]
    fn floor(&self) -> f64 {
        self.inner.floor
    }

    #[getter]
    fn selected_bandwidth(&self) -> Option<f64> {
        self.inner.selected_bandwidth
    }

    #[getter]
    fn pilot_bandwidth(&self) -> Option<f64> {
        self.inner.pilot_bandwidth
    }

    fn evaluate(&self, t: f64) -> f64 {
        self.inner.evaluate(t)
    }

    fn __repr__(&self) -> String {
        format!(
            "Marginal(delta_hat={}, sup_hat={}, bandwidth={:?})",
            self.inner.delta_hat, self.inner.sup_hat, self.inner.selected_bandwidth
        )
    }
}

/// The selected conditional-density estimate `y -> f_hat(x, y)`.
#[pyclass(frozen, name = "Estimate", module = "condens_py")]
struct PyEstimate {
    config: RiskConfig,
    out: PipelineOutput,
}

#[pymethods]
impl PyEstimate {
    #[getter]
    fn estimator(&self) -> String {
        self.config.estimator.to_string()
    }

    #[getter]
    fn x(&self) -> f64 {
        self.config.x
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.config.eta
    }

    /// Selected `(h1, h2)` for the kernel rule or `(m1, m2)` for projection.
    #[getter]
    fn selected<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        match &self.out.selection {
            Selection::Kernel(t) => {
                let h = t.chosen();
                (h.h1, h.h2).into_bound_py_any(py)
            }
            Selection::Projection(t) => {
                let m = t.chosen();
                (m.m1, m.m2).into_bound_py_any(py)
            }
        }
    }

    #[getter]
    fn chosen_index(&self) -> usize {
        match &self.out.selection {
            Selection::Kernel(t) => t.chosen_index,
            Selection::Projection(t) => t.chosen_index,
        }
    }

    /// One dict per candidate: `candidate`, `sigma`, `a`, `objective`.
    fn trace<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        fn record<'py, C: IntoPyObjectExt<'py>>(
            py: Python<'py>,
            c: C,
            sigma: f64,
            a: f64,
            objective: f64,
        ) -> PyResult<Bound<'py, PyDict>> {
            let d = PyDict::new(py);
            d.set_item("candidate", c.into_bound_py_any(py)?)?;
            d.set_item("sigma", sigma)?;
            d.set_item("a", a)?;
            d.set_item("objective", objective)?;
            Ok(d)
        }
        match &self.out.selection {
            Selection::Kernel(t) => t
                .records
                .iter()
                .map(|r| record(py, (r.candidate.h1, r.candidate.h2), r.sigma, r.a, r.objective))
                .collect(),
            Selection::Projection(t) => t
                .records
                .iter()
                .map(|r| record(py, (r.candidate.m1, r.candidate.m2), r.sigma, r.a, r.objective))
                .collect(),
        }
    }

    #[getter]
    fn marginal(&self) -> PyMarginal {
        PyMarginal {
            inner: self.out.marginal.clone(),
        }
    }

    #[getter]
    fn candidates(&self) -> usize {
        self.out.grid.candidates
    }

    fn evaluate(&self, y: f64) -> f64 {
        self.out.curve.eval(y)
    }

    fn evaluate_many(&self, ys: Vec<f64>) -> Vec<f64> {
        ys.into_iter().map(|y| self.out.curve.eval(y)).collect()
    }

    /// Integrated squared error against the true density of the sample's example.
    #[pyo3(signature = (quadrature_points = 2048))]
    fn mse(&self, quadrature_points: usize) -> PyResult<f64> {
        evaluation::mse(&self.out.curve, self.config.example, self.config.x, quadrature_points).map_err(to_py)
    }

    fn __call__(&self, y: f64) -> f64 {
        self.evaluate(y)
    }

    fn __repr__(&self) -> String {
        format!("Estimate(estimator={}, x={}, eta={})", self.config.estimator, self.config.x, self.config.eta)
    }
}

/// Monte Carlo MSE of one cell.
#[pyclass(frozen, name = "RiskReport", module = "condens_py")]
struct PyRiskReport {
    inner: RiskReport,
}

#[pymethods]
impl PyRiskReport {
    #[getter]
    fn mse_mean(&self) -> f64 {
        self.inner.mse_mean
    }

    /// `None` when a single replication was run.
    #[getter]
    fn mse_stderr(&self) -> Option<f64> {
        self.inner.stderr_defined.then_some(self.inner.mse_stderr)
    }

    #[getter]
    fn per_replication(&self) -> Vec<f64> {
        self.inner.per_replication.clone()
    }

    #[getter]
    fn replications(&self) -> usize {
        self.inner.config.replications
    }

    #[getter]
    fn base_seed(&self) -> u64 {
        self.inner.config.base_seed
    }

    #[getter]
    fn example(&self) -> String {
        self.inner.config.example.to_string()
    }

    #[getter]
    fn estimator(&self) -> String {
        self.inner.config.estimator.to_string()
    }

    #[getter]
    fn x(&self) -> f64 {
        self.inner.config.x
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.config.n
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.inner.config.eta
    }

    #[getter]
    fn fx_known(&self) -> bool {
        self.inner.config.fx_known
    }

    fn __repr__(&self) -> String {
        let c = &self.inner.config;
        format!(
            "RiskReport({} {} x={} n={} eta={} mse={} N={})",
            c.example, c.estimator, c.x, c.n, c.eta, self.inner.mse_mean, c.replications
        )
    }
}

/// Draws `n` pairs and `n` independent design points from an example.
#[pyfunction]
fn generate(example: &str, n: usize, seed: u64) -> PyResult<PySample> {
    let inner = condens::generate(parse_example(example)?, n, seed).map_err(to_py)?;
    Ok(PySample { inner })
}

#[pyfunction]
fn true_conditional_density(example: &str, x: f64, y: f64) -> PyResult<f64> {
    truth(parse_example(example)?, x, y).map_err(to_py)
}

#[pyfunction]
fn true_marginal_density(example: &str, x: f64) -> PyResult<f64> {
    Ok(truth_marginal(parse_example(example)?, x))
}

/// Data-driven estimate of the design density around `x`.
#[pyfunction]
#[pyo3(signature = (xs, x, a = 0.25, grid_size = 10, tuning_constant = 2.2))]
fn estimate_marginal(xs: Vec<f64>, x: f64, a: f64, grid_size: usize, tuning_constant: f64) -> PyResult<PyMarginal> {
    let cfg = MarginalConfig {
        neighborhood_halfwidth_a: a,
        grid_size,
        tuning_constant,
        ..MarginalConfig::default()
    };
    let inner = condens::gl_select_marginal(&xs, x, &cfg).map_err(to_py)?;
    Ok(PyMarginal { inner })
}

/// The true design density of an example, with bounds over the neighborhood of `x`.
#[pyfunction]
#[pyo3(signature = (example, x, n, a = 0.25))]
fn oracle_marginal(example: &str, x: f64, n: usize, a: f64) -> PyResult<PyMarginal> {
    let cfg = MarginalConfig {
        neighborhood_halfwidth_a: a,
        ..MarginalConfig::default()
    };
    let inner = condens::oracle_marginal(parse_example(example)?, x, n, &cfg).map_err(to_py)?;
    Ok(PyMarginal { inner })
}

/// Runs the marginal step, the candidate grid and the selection on one sample.
#[pyfunction]
#[pyo3(signature = (
    sample, x, estimator = "kernel", eta = 1.0, fx_known = false, strict_grid = false,
    penalty = "simplified", marginal_a = 0.25
))]
#[allow(clippy::too_many_arguments)]
fn estimate(
    py: Python<'_>,
    sample: &PySample,
    x: f64,
    estimator: &str,
    eta: f64,
    fx_known: bool,
    strict_grid: bool,
    penalty: &str,
    marginal_a: f64,
) -> PyResult<PyEstimate> {
    let obs = &sample.inner;
    let mut config = RiskConfig::new(obs.example, parse_estimator(estimator)?, x, obs.n(), eta);
    config.fx_known = fx_known;
    config.settings = settings(strict_grid, penalty, marginal_a)?;
    config.validate().map_err(to_py)?;
    let out = py.detach(|| evaluation::estimate(obs, &config)).map_err(to_py)?;
    Ok(PyEstimate { config, out })
}

#[allow(clippy::too_many_arguments)]
fn risk_config(
    example: &str,
    estimator: &str,
    x: f64,
    n: usize,
    eta: f64,
    fx_known: bool,
    replications: usize,
    base_seed: u64,
    clamp_nonneg: bool,
    strict_grid: bool,
    penalty: &str,
) -> PyResult<RiskConfig> {
    let mut cfg = RiskConfig::new(parse_example(example)?, parse_estimator(estimator)?, x, n, eta);
    cfg.fx_known = fx_known;
    cfg.replications = replications;
    cfg.base_seed = base_seed;
    cfg.clamp_nonneg = clamp_nonneg;
    cfg.settings = settings(strict_grid, penalty, MarginalConfig::default().neighborhood_halfwidth_a)?;
    Ok(cfg)
}

/// Monte Carlo MSE over `replications` samples; replication `r` uses seed `base_seed + r`.
#[pyfunction]
#[pyo3(signature = (
    example, estimator, x, n, eta, fx_known = false, replications = 100, base_seed = 0,
    clamp_nonneg = false, strict_grid = false, penalty = "simplified"
))]
#[allow(clippy::too_many_arguments)]
fn run_cell(
    py: Python<'_>,
    example: &str,
    estimator: &str,
    x: f64,
    n: usize,
    eta: f64,
    fx_known: bool,
    replications: usize,
    base_seed: u64,
    clamp_nonneg: bool,
    strict_grid: bool,
    penalty: &str,
) -> PyResult<PyRiskReport> {
    let cfg = risk_config(
        example,
        estimator,
        x,
        n,
        eta,
        fx_known,
        replications,
        base_seed,
        clamp_nonneg,
        strict_grid,
        penalty,
    )?;
    let inner = py.detach(|| condens::run_cell(&cfg)).map_err(to_py)?;
    Ok(PyRiskReport { inner })
}

/// One report per eta, sorted ascending; every eta reuses the same samples.
#[pyfunction]
#[pyo3(signature = (
    example, estimator, x, n, etas, fx_known = false, replications = 100, base_seed = 0,
    clamp_nonneg = false, strict_grid = false, penalty = "simplified"
))]
#[allow(clippy::too_many_arguments)]
fn run_eta_sweep(
    py: Python<'_>,
    example: &str,
    estimator: &str,
    x: f64,
    n: usize,
    etas: Vec<f64>,
    fx_known: bool,
    replications: usize,
    base_seed: u64,
    clamp_nonneg: bool,
    strict_grid: bool,
    penalty: &str,
) -> PyResult<Vec<PyRiskReport>> {
    let first = etas.first().copied().unwrap_or(1.0);
    let cfg = risk_config(
        example,
        estimator,
        x,
        n,
        first,
        fx_known,
        replications,
        base_seed,
        clamp_nonneg,
        strict_grid,
        penalty,
    )?;
    let reports = py.detach(|| evaluation::run_eta_sweep(&cfg, &etas)).map_err(to_py)?;
    Ok(reports.into_iter().map(|inner| PyRiskReport { inner }).collect())
}

#[pymodule]
fn condens_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", condens::VERSION)?;
    m.add_class::<PySample>()?;
    m.add_class::<PyMarginal>()?;
    m.add_class::<PyEstimate>()?;
    m.add_class::<PyRiskReport>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(true_conditional_density, m)?)?;
    m.add_function(wrap_pyfunction!(true_marginal_density, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_marginal, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_marginal, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(run_cell, m)?)?;
    m.add_function(wrap_pyfunction!(run_eta_sweep, m)?)?;
    Ok(())
}
