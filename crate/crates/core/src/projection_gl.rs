//! Adaptive least-squares projection estimator on piecewise Legendre bases.
//!
//! The x-window `[x - 2A, x + 2A]` is cut into `2^{m1}` cells carrying Legendre
//! polynomials of degree `<= r`; the y-range `B` into `2^{m2}` cells of degree
//! `<= r_y`. Only the Gram block of the cell containing `x` is assembled.

use crate::error::{ensure, Error, Result};
use crate::kernel_gl::GridMode;
use crate::legendre::legendre;
use crate::marginal::{MarginalEstimate, NeighborhoodRate};
use crate::quadrature::gauss_legendre;
use crate::sampling::ObservationSet;
use crate::selection::{self, SelectionTrace};
use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;
use std::cmp::Ordering;
use std::collections::hash_map::Entry;
use std::collections::HashMap;

/// Bases of the projection models around one evaluation point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BasisSpec {
    /// `A`: the x-window is `[x_center - 2A, x_center + 2A]`.
    pub a: f64,
    pub x_center: f64,
    pub y_lo: f64,
    pub y_hi: f64,
    /// Legendre degree in x.
    pub r: usize,
    /// Legendre degree in y.
    pub r_y: usize,
}

impl BasisSpec {
    pub fn new(a: f64, x_center: f64, y_range: (f64, f64), r: usize, r_y: usize) -> Result<Self> {
        ensure!(a > 0.0 && a.is_finite(), Argument, "A must be positive");
        ensure!(
            y_range.0 < y_range.1 && y_range.0.is_finite() && y_range.1.is_finite(),
            Argument,
            "empty y-range ({}, {})",
            y_range.0,
            y_range.1
        );
        Ok(Self {
            a,
            x_center,
            y_lo: y_range.0,
            y_hi: y_range.1,
            r,
            r_y,
        })
    }

    /// y-range `[min Y - 0.1 R, max Y + 0.1 R]` with `R` the sample range.
    pub fn from_sample(ys: &[f64], x_center: f64, a: f64, r: usize, r_y: usize) -> Result<Self> {
        ensure!(!ys.is_empty(), Argument, "no responses");
        let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let pad = if hi > lo { 0.1 * (hi - lo) } else { 0.5 };
        Self::new(a, x_center, (lo - pad, hi + pad), r, r_y)
    }

    pub fn y_width(&self) -> f64 {
        self.y_hi - self.y_lo
    }

    /// `phi_1 = (r + 1) / (4A)`.
    pub fn phi1(&self) -> f64 {
        (self.r + 1) as f64 / (4.0 * self.a)
    }

    /// `phi_2 = (r_y + 1) / |B|`.
    pub fn phi2(&self) -> f64 {
        (self.r_y + 1) as f64 / self.y_width()
    }

    fn x_cell_width(&self, m1: u32) -> f64 {
        4.0 * self.a / 2f64.powi(m1 as i32)
    }

    fn y_cell_width(&self, m2: u32) -> f64 {
        self.y_width() / 2f64.powi(m2 as i32)
    }

    /// 1-based x-cell containing `u`, if any.
    pub fn x_cell(&self, m1: u32, u: f64) -> Option<usize> {
        locate(u, self.x_center - 2.0 * self.a, self.x_cell_width(m1), 1 << m1)
    }

    /// 1-based y-cell containing `v`, if any.
    pub fn y_cell(&self, m2: u32, v: f64) -> Option<usize> {
        locate(v, self.y_lo, self.y_cell_width(m2), 1 << m2)
    }
}

fn locate(u: f64, origin: f64, width: f64, cells: usize) -> Option<usize> {
    let t = (u - origin) / width;
    if t.is_nan() || t < 0.0 || t >= cells as f64 {
        return None;
    }
    Some((t.floor() as usize).min(cells - 1) + 1)
}

/// Orthonormal piecewise Legendre function on cell `cell` of width `width`
/// starting at `origin`, or 0 outside it.
fn piecewise_legendre(origin: f64, width: f64, cell: usize, d: usize, u: f64) -> f64 {
    let lo = origin + width * (cell - 1) as f64;
    if !(u >= lo && u < lo + width) {
        return 0.0;
    }
    let t = 2.0 * (u - lo) / width - 1.0;
    ((2 * d + 1) as f64 / width).sqrt() * legendre(d, t)
}

/// `phi^m_{l,d}(u)`, the x-basis function of degree `d` on cell `l`.
pub fn legendre_basis_eval(spec: &BasisSpec, m1: u32, l: usize, d: usize, u: f64) -> Result<f64> {
    ensure!(l >= 1 && l <= 1 << m1, Argument, "cell {l} outside 1..={}", 1u64 << m1);
    ensure!(d <= spec.r, Argument, "degree {d} above r = {}", spec.r);
    let origin = spec.x_center - 2.0 * spec.a;
    Ok(piecewise_legendre(origin, spec.x_cell_width(m1), l, d, u))
}

/// `psi^m_{k,e}(v)`, the y-basis function of degree `e` on cell `k`.
pub fn y_basis_eval(spec: &BasisSpec, m2: u32, k: usize, e: usize, v: f64) -> Result<f64> {
    ensure!(k >= 1 && k <= 1 << m2, Argument, "cell {k} outside 1..={}", 1u64 << m2);
    ensure!(e <= spec.r_y, Argument, "degree {e} above r_y = {}", spec.r_y);
    Ok(piecewise_legendre(spec.y_lo, spec.y_cell_width(m2), k, e, v))
}

/// Dyadic resolution pair `(m1, m2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ModelIndex {
    pub m1: u32,
    pub m2: u32,
}

impl ModelIndex {
    pub fn new(m1: u32, m2: u32) -> Self {
        Self { m1, m2 }
    }

    /// Componentwise minimum.
    pub fn meet(self, other: ModelIndex) -> ModelIndex {
        ModelIndex {
            m1: self.m1.min(other.m1),
            m2: self.m2.min(other.m2),
        }
    }

    pub fn dim_x(self, spec: &BasisSpec) -> usize {
        (spec.r + 1) << self.m1
    }

    pub fn dim_y(self, spec: &BasisSpec) -> usize {
        (spec.r_y + 1) << self.m2
    }
}

/// Fitted section `y -> f_m(x, y)` of one model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionFit {
    pub model: ModelIndex,
    pub spec: BasisSpec,
    pub x: f64,
    /// 1-based x-cell containing `x`.
    pub cell: usize,
    /// Coefficient block, `(r + 1) x D_{m2}`, row-major by x-degree.
    pub coefficients: Vec<f64>,
    /// Coefficients of `y -> f_m(x, y)` over the y-basis, indexed
    /// `(k - 1)(r_y + 1) + e`.
    pub section: Vec<f64>,
    pub gram: Vec<f64>,
    pub gram_min_eig: f64,
    pub thresholded: bool,
}

impl ProjectionFit {
    pub fn evaluate(&self, y: f64) -> f64 {
        let Some(k) = self.spec.y_cell(self.model.m2, y) else {
            return 0.0;
        };
        let ry = self.spec.r_y;
        let width = self.spec.y_cell_width(self.model.m2);
        (0..=ry)
            .map(|e| {
                self.section[(k - 1) * (ry + 1) + e]
                    * piecewise_legendre(self.spec.y_lo, width, k, e, y)
            })
            .sum()
    }

    /// Edges of the y-cells.
    pub fn breakpoints(&self) -> Vec<f64> {
        let cells = 1usize << self.model.m2;
        let w = self.spec.y_cell_width(self.model.m2);
        (0..=cells).map(|k| self.spec.y_lo + w * k as f64).collect()
    }

    pub fn support(&self) -> (f64, f64) {
        (self.spec.y_lo, self.spec.y_hi)
    }
}

/// Smallest eigenvalue of a symmetric `k x k` matrix (row-major).
fn min_eigenvalue(g: &[f64], k: usize) -> f64 {
    match k {
        1 => g[0],
        2 => {
            let (a, b, c) = (g[0], g[1], g[3]);
            let mid = 0.5 * (a + c);
            mid - (0.25 * (a - c) * (a - c) + b * b).sqrt()
        }
        _ => SymmetricEigen::new(DMatrix::from_row_slice(k, k, g))
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min),
    }
}

/// `G X = Z` for a positive definite `G` (`k x k`) and `Z` (`k x c`).
fn solve_spd(g: &[f64], z: &[f64], k: usize, c: usize) -> Result<Vec<f64>> {
    if k == 1 {
        return Ok(z.iter().map(|v| v / g[0]).collect());
    }
    let gm = DMatrix::from_row_slice(k, k, g);
    let zm = DMatrix::from_row_slice(k, c, z);
    let chol = gm
        .cholesky()
        .ok_or_else(|| Error::Estimation("Gram block is not positive definite".into()))?;
    let sol = chol.solve(&zm);
    Ok((0..k)
        .flat_map(|i| (0..c).map(move |j| (i, j)))
        .map(|(i, j)| sol[(i, j)])
        .collect())
}

/// `(1 + eta)^{-2/5} delta`: the lower bound on the Gram spectrum.
pub fn spectral_threshold(delta_hat: f64, eta: f64) -> f64 {
    (1.0 + eta).powf(-0.4) * delta_hat
}

/// Least-squares fit of model `m` restricted to the x-cell containing `x`.
pub fn fit_projection(
    obs: &ObservationSet,
    m: ModelIndex,
    spec: &BasisSpec,
    x: f64,
    delta_hat: f64,
    eta: f64,
) -> Result<ProjectionFit> {
    ensure!(eta > -1.0, Argument, "eta must exceed -1, got {eta}");
    ensure!(delta_hat > 0.0, Argument, "delta_hat must be positive");
    let cell = spec
        .x_cell(m.m1, x)
        .ok_or_else(|| Error::Argument(format!("x = {x} outside the estimation window")))?;
    let n = obs.n() as f64;
    let (kx, ry) = (spec.r + 1, spec.r_y + 1);
    let dy = m.dim_y(spec);
    let origin = spec.x_center - 2.0 * spec.a;
    let xw = spec.x_cell_width(m.m1);
    let yw = spec.y_cell_width(m.m2);

    let mut gram = vec![0.0; kx * kx];
    let mut z = vec![0.0; kx * dy];
    let mut phi = vec![0.0; kx];
    for (&xi, &yi) in obs.xs.iter().zip(&obs.ys) {
        if spec.x_cell(m.m1, xi) != Some(cell) {
            continue;
        }
        for (d, p) in phi.iter_mut().enumerate() {
            *p = piecewise_legendre(origin, xw, cell, d, xi);
        }
        for d1 in 0..kx {
            for d2 in 0..kx {
                gram[d1 * kx + d2] += phi[d1] * phi[d2] / n;
            }
        }
        if let Some(k) = spec.y_cell(m.m2, yi) {
            for e in 0..ry {
                let psi = piecewise_legendre(spec.y_lo, yw, k, e, yi);
                let col = (k - 1) * ry + e;
                for d in 0..kx {
                    z[d * dy + col] += phi[d] * psi / n;
                }
            }
        }
    }

    let gram_min_eig = min_eigenvalue(&gram, kx);
    let thresholded = gram_min_eig.is_nan() || gram_min_eig <= spectral_threshold(delta_hat, eta);
    let coefficients = if thresholded {
        vec![0.0; kx * dy]
    } else {
        solve_spd(&gram, &z, kx, dy)?
    };
    let phi_x: Vec<f64> = (0..kx)
        .map(|d| piecewise_legendre(origin, xw, cell, d, x))
        .collect();
    let section = (0..dy)
        .map(|col| (0..kx).map(|d| coefficients[d * dy + col] * phi_x[d]).sum())
        .collect();
    Ok(ProjectionFit {
        model: m,
        spec: *spec,
        x,
        cell,
        coefficients,
        section,
        gram,
        gram_min_eig,
        thresholded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum PenaltyForm {
    /// `chi = (1 + eta) sqrt(4 phi1 phi2)`, available when `r = 0`.
    #[default]
    Simplified,
    /// `chi^2 = (1 + eta)^2 4 phi1 phi2 (r + 1) sup f_X / delta`.
    Full,
}

/// `sigma(m) = chi sqrt(D_{m1} D_{m2} / (delta n))`. The simplified form
/// falls back to the full one when `r > 0`.
pub fn sigma_projection(
    m: ModelIndex,
    delta_hat: f64,
    sup_hat: f64,
    n: usize,
    eta: f64,
    spec: &BasisSpec,
    form: PenaltyForm,
) -> Result<f64> {
    ensure!(delta_hat > 0.0, Argument, "delta_hat must be positive");
    ensure!(n > 0, Argument, "n must be positive");
    ensure!(eta > -1.0, Argument, "eta must exceed -1, got {eta}");
    let base = 4.0 * spec.phi1() * spec.phi2();
    let chi = match form {
        PenaltyForm::Simplified if spec.r == 0 => (1.0 + eta) * base.sqrt(),
        _ => {
            ensure!(sup_hat > 0.0, Argument, "sup_hat must be positive");
            (1.0 + eta) * (base * (spec.r + 1) as f64 * sup_hat / delta_hat).sqrt()
        }
    };
    let dims = (m.dim_x(spec) * m.dim_y(spec)) as f64;
    Ok(chi * (dims / (delta_hat * n as f64)).sqrt())
}

/// Exact `||a - b||_{x,2}` of two fits on the same y-range, computed cell by
/// cell on the finer of the two dyadic partitions.
pub fn l2_distance_y_pp(a: &ProjectionFit, b: &ProjectionFit) -> Result<f64> {
    ensure!(
        a.spec.y_lo == b.spec.y_lo && a.spec.y_hi == b.spec.y_hi && a.spec.r_y == b.spec.r_y,
        Argument,
        "fits live on different y-bases"
    );
    let fine = a.model.m2.max(b.model.m2);
    let width = a.spec.y_cell_width(fine);
    let (nodes, weights) = gauss_legendre(a.spec.r_y + 1);
    let mut acc = 0.0;
    for k in 0..(1usize << fine) {
        let lo = a.spec.y_lo + width * k as f64;
        for (t, w) in nodes.iter().zip(&weights) {
            let y = lo + 0.5 * width * (t + 1.0);
            let d = a.evaluate(y) - b.evaluate(y);
            acc += w * d * d;
        }
    }
    Ok((0.5 * width * acc).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelGridOptions {
    pub mode: GridMode,
    pub k_n: NeighborhoodRate,
}

impl Default for ModelGridOptions {
    fn default() -> Self {
        Self {
            mode: GridMode::Practical,
            k_n: NeighborhoodRate::LogN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelGrid {
    pub models: Vec<ModelIndex>,
    pub mode: GridMode,
    pub relaxed_x: bool,
    pub relaxed_y: bool,
}

impl ModelGrid {
    pub fn from_models(models: Vec<ModelIndex>) -> Result<Self> {
        ensure!(!models.is_empty(), Configuration, "empty model grid");
        Ok(Self {
            models,
            mode: GridMode::Practical,
            relaxed_x: true,
            relaxed_y: true,
        })
    }

    pub fn relaxed(&self) -> bool {
        self.relaxed_x || self.relaxed_y
    }
}

/// Exponents `m` with `(deg + 1) 2^m` inside `[lo, hi]`.
fn dyadic_levels(deg: usize, lo: f64, hi: f64) -> Vec<u32> {
    (0..40u32)
        .filter(|&m| {
            let d = ((deg + 1) as f64) * 2f64.powi(m as i32);
            d >= lo && d <= hi
        })
        .collect()
}

/// All dyadic models whose dimensions satisfy the size constraints.
pub fn build_model_grid(
    n: usize,
    delta_hat: f64,
    spec: &BasisSpec,
    opts: &ModelGridOptions,
) -> Result<ModelGrid> {
    ensure!(n >= 8, Configuration, "need n >= 8 to build a model grid, got {n}");
    ensure!(delta_hat > 0.0, Argument, "delta_hat must be positive");
    let nf = n as f64;
    let relaxed_x_levels = dyadic_levels(spec.r, 1.0, nf / 4.0);
    let relaxed_y_levels = dyadic_levels(spec.r_y, 2.0, nf);
    let (xs, ys, rx, ry) = match opts.mode {
        GridMode::Practical => (relaxed_x_levels, relaxed_y_levels, true, true),
        GridMode::Strict => {
            let log_n = nf.ln();
            let sx = dyadic_levels(
                spec.r,
                opts.k_n.k_n(n) * (spec.r + 1) as f64,
                delta_hat * nf / log_n.powi(3),
            );
            let sy = dyadic_levels(spec.r_y, log_n * log_n, nf);
            // An empty x range is relaxed upward only: the lower bound keeps
            // the x-cells inside V_n, where delta_hat bounds the design
            // density. Without it coarse cells fall under the Gram threshold.
            let kx = dyadic_levels(spec.r, opts.k_n.k_n(n) * (spec.r + 1) as f64, nf / 4.0);
            let (xs, rx) = match (sx.is_empty(), kx.is_empty()) {
                (false, _) => (sx, false),
                (true, false) => (kx, true),
                (true, true) => (relaxed_x_levels, true),
            };
            let (ys, ry) = if sy.is_empty() { (relaxed_y_levels, true) } else { (sy, false) };
            (xs, ys, rx, ry)
        }
    };
    ensure!(
        !xs.is_empty() && !ys.is_empty(),
        Configuration,
        "no admissible model at n = {n}"
    );
    let models = xs
        .iter()
        .flat_map(|&m1| ys.iter().map(move |&m2| ModelIndex { m1, m2 }))
        .collect();
    Ok(ModelGrid {
        models,
        mode: opts.mode,
        relaxed_x: rx,
        relaxed_y: ry,
    })
}

/// Ties: smallest `D_{m1} D_{m2}`, then smaller `m1`, then smaller `m2`.
fn prefer_model(a: &ModelIndex, b: &ModelIndex) -> Ordering {
    (a.m1 + a.m2)
        .cmp(&(b.m1 + b.m2))
        .then(a.m1.cmp(&b.m1))
        .then(a.m2.cmp(&b.m2))
}

/// Fits every model of the grid and every `m' ^ m`, then selects by the GL rule.
#[allow(clippy::too_many_arguments)]
pub fn gl_select_model(
    obs: &ObservationSet,
    fx: &MarginalEstimate,
    grid: &ModelGrid,
    spec: &BasisSpec,
    x: f64,
    eta: f64,
    form: PenaltyForm,
) -> Result<(ProjectionFit, SelectionTrace<ModelIndex>)> {
    ensure!(!grid.models.is_empty(), Configuration, "empty model grid");
    let mut fits: HashMap<ModelIndex, ProjectionFit> = HashMap::new();
    for &m in &grid.models {
        for &mp in &grid.models {
            let meet = m.meet(mp);
            if let Entry::Vacant(slot) = fits.entry(meet) {
                slot.insert(fit_projection(obs, meet, spec, x, fx.delta_hat, eta)?);
            }
        }
    }
    let sigma = grid
        .models
        .iter()
        .map(|&m| sigma_projection(m, fx.delta_hat, fx.sup_hat, obs.n(), eta, spec, form))
        .collect::<Result<Vec<_>>>()?;
    let k = grid.models.len();
    let mut dist = vec![0.0; k * k];
    for (i, &m) in grid.models.iter().enumerate() {
        for (j, &mp) in grid.models.iter().enumerate() {
            dist[i * k + j] = l2_distance_y_pp(&fits[&mp], &fits[&mp.meet(m)])?;
        }
    }
    let trace = selection::select(grid.models.clone(), sigma, |i, j| dist[i * k + j], prefer_model);
    let best = fits
        .remove(trace.chosen())
        .expect("every grid model was fitted");
    Ok((best, trace))
}
