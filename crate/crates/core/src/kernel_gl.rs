//! Adaptive kernel estimator of the conditional density at a fixed `x`.
//!
//! For a bandwidth `h = (h1, h2)` the estimate is
//! `f_h(x, y) = (1/n) sum_i K_{h1}(x - X_i) K_{h2}(y - Y_i) / f_X(X_i)`,
//! which at fixed `x` is a Gaussian mixture in `y` centered at the `Y_i`.
//! With Gaussian kernels `K_h * K_{h'} = K_{h''}`, `h''^2 = h^2 + h'^2`, so the
//! double-smoothed estimates and every `||.||_{x,2}` distance reduce to sums of
//! Gaussian cross terms `int phi_s(y - u) phi_t(y - v) dy = phi_{sqrt(s^2 + t^2)}(u - v)`.

use crate::error::{ensure, Error, Result};
use crate::gauss::{kernel_l2_2d, normal_pdf, std_normal_pdf, SortedMixture, CUTOFF_Z, KERNEL_L1};
use crate::marginal::{MarginalEstimate, NeighborhoodRate};
use crate::sampling::ObservationSet;
use crate::selection::{self, SelectionTrace};
use rayon::prelude::*;
use serde::Serialize;
use std::cmp::Ordering;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bandwidth2 {
    /// x-direction
    pub h1: f64,
    /// y-direction
    pub h2: f64,
}

impl Bandwidth2 {
    pub fn new(h1: f64, h2: f64) -> Result<Self> {
        ensure!(
            h1 > 0.0 && h2 > 0.0 && h1.is_finite() && h2.is_finite(),
            Argument,
            "bandwidths must be positive and finite, got ({h1}, {h2})"
        );
        Ok(Self { h1, h2 })
    }

    /// Bandwidth of `K_h * K_{h'}`.
    pub fn convolve(self, other: Bandwidth2) -> Bandwidth2 {
        Bandwidth2 {
            h1: self.h1.hypot(other.h1),
            h2: self.h2.hypot(other.h2),
        }
    }

    pub fn volume(self) -> f64 {
        self.h1 * self.h2
    }
}

/// Ties: largest `h1 * h2` first, then larger `h1`, then larger `h2`.
fn prefer_bandwidth(a: &Bandwidth2, b: &Bandwidth2) -> Ordering {
    b.volume()
        .total_cmp(&a.volume())
        .then(b.h1.total_cmp(&a.h1))
        .then(b.h2.total_cmp(&a.h2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum GridMode {
    /// Ten free geometric bandwidths per axis over `[n^{-0.9}, 0.5]`.
    #[default]
    Practical,
    /// Integer reciprocal bandwidths inside the theoretical bounds, with the
    /// practical range as a per-axis fallback when those bounds are empty.
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridOptions {
    pub per_axis: usize,
    pub mode: GridMode,
    pub k_n: NeighborhoodRate,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            per_axis: 10,
            mode: GridMode::Practical,
            k_n: NeighborhoodRate::LogN,
        }
    }
}

/// Product grid `hx x hy` of candidate bandwidths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandwidthGrid {
    pub hx: Vec<f64>,
    pub hy: Vec<f64>,
    pub n: usize,
    pub delta_hat: f64,
    pub mode: GridMode,
    /// The x-axis uses the practical range.
    pub relaxed_x: bool,
    /// The y-axis uses the practical range.
    pub relaxed_y: bool,
}

impl BandwidthGrid {
    /// An explicit grid, e.g. for diagnostics.
    pub fn from_axes(hx: Vec<f64>, hy: Vec<f64>, n: usize, delta_hat: f64) -> Result<Self> {
        ensure!(!hx.is_empty() && !hy.is_empty(), Configuration, "empty bandwidth axis");
        ensure!(
            hx.iter().chain(&hy).all(|&h| h > 0.0 && h.is_finite()),
            Configuration,
            "bandwidths must be positive"
        );
        Ok(Self {
            hx,
            hy,
            n,
            delta_hat,
            mode: GridMode::Practical,
            relaxed_x: true,
            relaxed_y: true,
        })
    }

    pub fn len(&self) -> usize {
        self.hx.len() * self.hy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn relaxed(&self) -> bool {
        self.relaxed_x || self.relaxed_y
    }

    /// Candidate `k`, ordered x-major.
    pub fn pair(&self, k: usize) -> Bandwidth2 {
        let q = self.hy.len();
        Bandwidth2 {
            h1: self.hx[k / q],
            h2: self.hy[k % q],
        }
    }

    pub fn pairs(&self) -> Vec<Bandwidth2> {
        (0..self.len()).map(|k| self.pair(k)).collect()
    }
}

fn geometric(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![(lo * hi).sqrt()];
    }
    let step = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|i| lo * (step * i as f64).exp()).collect()
}

/// Integer reciprocals spread geometrically over `[lo, hi]`, as bandwidths in
/// increasing order. `None` when no integer lies in the interval.
fn integer_reciprocals(lo: f64, hi: f64, count: usize) -> Option<Vec<f64>> {
    let (lo, hi) = (lo.max(1.0).ceil(), hi.floor());
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return None;
    }
    let mut inv: Vec<f64> = geometric(lo, hi, count).into_iter().map(f64::round).collect();
    inv.sort_by(|a, b| b.total_cmp(a));
    inv.dedup();
    Some(inv.into_iter().map(|k| 1.0 / k).collect())
}

/// Candidate bandwidths for a sample of size `n`.
pub fn build_bandwidth_grid(n: usize, delta_hat: f64, opts: &GridOptions) -> Result<BandwidthGrid> {
    ensure!(n >= 8, Configuration, "need n >= 8 to build a bandwidth grid, got {n}");
    ensure!(opts.per_axis >= 1, Configuration, "per_axis must be positive");
    ensure!(delta_hat > 0.0, Argument, "delta_hat must be positive");
    let nf = n as f64;
    let practical = geometric(nf.powf(-0.9), 0.5, opts.per_axis);
    let (hx, hy, relaxed_x, relaxed_y) = match opts.mode {
        GridMode::Practical => (practical.clone(), practical, true, true),
        GridMode::Strict => {
            let log_n = nf.ln();
            let x_axis =
                integer_reciprocals(opts.k_n.k_n(n), delta_hat * nf / log_n.powi(3), opts.per_axis);
            let y_axis = integer_reciprocals(log_n * log_n, nf, opts.per_axis);
            let (hx, rx) = match x_axis {
                Some(v) => (v, false),
                None => (practical.clone(), true),
            };
            let (hy, ry) = match y_axis {
                Some(v) => (v, false),
                None => (practical, true),
            };
            (hx, hy, rx, ry)
        }
    };
    Ok(BandwidthGrid {
        hx,
        hy,
        n,
        delta_hat,
        mode: opts.mode,
        relaxed_x,
        relaxed_y,
    })
}

/// A conditional density estimate at fixed `x`, as a Gaussian mixture in `y`:
/// `f(y) = sum_i w_i phi((y - c_i) / s) / s`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelCurve {
    mixture: SortedMixture,
    pub x: f64,
}

impl KernelCurve {
    pub fn new(centers: &[f64], weights: &[f64], y_scale: f64, x: f64) -> Result<Self> {
        ensure!(centers.len() == weights.len(), Argument, "centers and weights differ in length");
        ensure!(y_scale > 0.0, Argument, "y scale must be positive");
        ensure!(weights.iter().all(|w| w.is_finite()), Argument, "non-finite weight");
        Ok(Self {
            mixture: SortedMixture::new(centers, weights, y_scale),
            x,
        })
    }

    pub fn evaluate(&self, y: f64) -> f64 {
        self.mixture.eval(y)
    }

    /// Centers in increasing order.
    pub fn centers(&self) -> &[f64] {
        self.mixture.centers()
    }

    /// Weights aligned with [`KernelCurve::centers`].
    pub fn weights(&self) -> &[f64] {
        self.mixture.weights()
    }

    pub fn y_scale(&self) -> f64 {
        self.mixture.scale()
    }

    /// Total mass `int f(y) dy = sum_i w_i`.
    pub fn mass(&self) -> f64 {
        self.weights().iter().sum()
    }

    /// Interval outside which every component is below the cutoff.
    pub fn support(&self) -> (f64, f64) {
        let c = self.centers();
        let pad = CUTOFF_Z * self.y_scale();
        match (c.first(), c.last()) {
            (Some(lo), Some(hi)) => (lo - pad, hi + pad),
            _ => (0.0, 0.0),
        }
    }

    /// A copy with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> KernelCurve {
        let w: Vec<f64> = self.weights().iter().map(|w| w * factor).collect();
        KernelCurve {
            mixture: SortedMixture::new(self.centers(), &w, self.y_scale()),
            x: self.x,
        }
    }
}

/// `1 / (n f_X(X_i))`, with `f_X` clamped below by the marginal floor.
fn inverse_design_weights(obs: &ObservationSet, fx: &MarginalEstimate) -> Vec<f64> {
    let n = obs.n() as f64;
    obs.xs
        .iter()
        .map(|&xi| 1.0 / (n * fx.evaluate_clamped(xi)))
        .collect()
}

fn curve_from_weights(
    xs: &[f64],
    ys: &[f64],
    inv_design: &[f64],
    h: Bandwidth2,
    x: f64,
) -> KernelCurve {
    let w: Vec<f64> = xs
        .iter()
        .zip(inv_design)
        .map(|(&xi, g)| g * normal_pdf(x - xi, h.h1))
        .collect();
    KernelCurve {
        mixture: SortedMixture::new(ys, &w, h.h2),
        x,
    }
}

/// `f_h(x, .)` with the design density taken from `fx`.
pub fn kernel_estimate(
    obs: &ObservationSet,
    fx: &MarginalEstimate,
    h: Bandwidth2,
    x: f64,
) -> Result<KernelCurve> {
    ensure!(fx.delta_hat > 0.0, Argument, "delta_hat must be positive");
    let g = inverse_design_weights(obs, fx);
    Ok(curve_from_weights(&obs.xs, &obs.ys, &g, h, x))
}

/// `(K_{h'} * f_h)(x, .)`, i.e. the single estimate at `h''`.
pub fn double_smoothed_estimate(
    obs: &ObservationSet,
    fx: &MarginalEstimate,
    h: Bandwidth2,
    h_prime: Bandwidth2,
    x: f64,
) -> Result<KernelCurve> {
    kernel_estimate(obs, fx, h.convolve(h_prime), x)
}

/// `int (a - b)^2 dy` in closed form.
fn l2_sq(a: &KernelCurve, b: &KernelCurve) -> f64 {
    let cross = |p: &KernelCurve, q: &KernelCurve| {
        let s = p.y_scale().hypot(q.y_scale());
        let mut acc = 0.0;
        for (cp, wp) in p.centers().iter().zip(p.weights()) {
            for (cq, wq) in q.centers().iter().zip(q.weights()) {
                acc += wp * wq * normal_pdf(cp - cq, s);
            }
        }
        acc
    };
    cross(a, a) - 2.0 * cross(a, b) + cross(b, b)
}

/// Exact `||a - b||_{x,2}` through the Gaussian cross-term identity.
pub fn l2_distance_y(a: &KernelCurve, b: &KernelCurve) -> f64 {
    l2_sq(a, b).max(0.0).sqrt()
}

/// `sigma(h) = chi / sqrt(delta n h1 h2)`, `chi = (1 + eta)(1 + ||K||_1)||K||_2`.
pub fn sigma_kernel(h: Bandwidth2, delta_hat: f64, n: usize, eta: f64) -> Result<f64> {
    ensure!(delta_hat > 0.0, Argument, "delta_hat must be positive, got {delta_hat}");
    ensure!(n > 0, Argument, "n must be positive");
    ensure!(h.h1 > 0.0 && h.h2 > 0.0, Argument, "bandwidths must be positive");
    ensure!(eta > -1.0, Argument, "eta must exceed -1, got {eta}");
    let chi = (1.0 + eta) * (1.0 + KERNEL_L1) * kernel_l2_2d();
    Ok(chi / (delta_hat * n as f64 * h.volume()).sqrt())
}

/// Observations sorted by `y` with their inverse design weights and
/// x-offsets, shared by all batched Gram computations.
struct SortedSample {
    ys: Vec<f64>,
    inv_design: Vec<f64>,
    dx: Vec<f64>,
}

impl SortedSample {
    fn new(xs: &[f64], ys: &[f64], inv_design: &[f64], x: f64) -> Self {
        let mut order: Vec<usize> = (0..ys.len()).collect();
        order.sort_by(|&a, &b| ys[a].total_cmp(&ys[b]));
        Self {
            ys: order.iter().map(|&i| ys[i]).collect(),
            inv_design: order.iter().map(|&i| inv_design[i]).collect(),
            dx: order.iter().map(|&i| x - xs[i]).collect(),
        }
    }

    fn len(&self) -> usize {
        self.ys.len()
    }

    /// x-weights `g_i phi_{scale}(x - X_i)` for every scale, with columns
    /// sorted by increasing scale.
    fn weight_matrix(&self, scales: &[f64]) -> WeightMatrix {
        let k = scales.len();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| scales[a].total_cmp(&scales[b]));
        let sorted: Vec<f64> = order.iter().map(|&c| scales[c]).collect();
        let mut data = vec![0.0; self.len() * k];
        let mut first = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let reach = self.dx[i].abs() / CUTOFF_Z;
            first.push(sorted.partition_point(|&s| s < reach));
            for (c, &s) in sorted.iter().enumerate() {
                data[i * k + c] = self.inv_design[i] * normal_pdf(self.dx[i], s);
            }
        }
        WeightMatrix { data, k, order, first }
    }

    /// Visits `(i, j, phi_s(Y_j - Y_i))` for `j >= i` within the cutoff.
    #[inline]
    fn for_each_pair<F: FnMut(usize, usize, f64)>(&self, s: f64, mut f: F) {
        let reach = CUTOFF_Z * s;
        let inv = 1.0 / s;
        let n = self.len();
        for i in 0..n {
            f(i, i, inv * std_normal_pdf(0.0));
            let yi = self.ys[i];
            for j in (i + 1)..n {
                let d = self.ys[j] - yi;
                if d > reach {
                    break;
                }
                f(i, j, inv * std_normal_pdf(d * inv));
            }
        }
    }

    /// `u_c^T M_s u_c` for every column `c` of `u`, where
    /// `M_s[i][j] = phi_s(Y_i - Y_j)`. Output in the original column order.
    fn quadratic_forms(&self, s: f64, u: &WeightMatrix) -> Vec<f64> {
        let k = u.k;
        let mut acc = vec![0.0; k];
        self.for_each_pair(s, |i, j, m| {
            let lo = u.first[i].max(u.first[j]);
            let (ui, uj) = (&u.data[i * k + lo..(i + 1) * k], &u.data[j * k + lo..(j + 1) * k]);
            let m = if i == j { m } else { 2.0 * m };
            for ((a, x), y) in acc[lo..].iter_mut().zip(ui).zip(uj) {
                *a += m * x * y;
            }
        });
        u.unsort(&acc)
    }

    /// `M_s u`, row-major `n x k` in the original column order.
    fn apply(&self, s: f64, u: &WeightMatrix) -> Vec<f64> {
        let k = u.k;
        let mut out = vec![0.0; self.len() * k];
        self.for_each_pair(s, |i, j, m| {
            if i == j {
                let lo = u.first[i];
                for c in lo..k {
                    out[i * k + c] += m * u.data[i * k + c];
                }
            } else {
                let lj = u.first[j];
                let (oi, uj) = (&mut out[i * k + lj..(i + 1) * k], &u.data[j * k + lj..(j + 1) * k]);
                for (o, v) in oi.iter_mut().zip(uj) {
                    *o += m * v;
                }
                let li = u.first[i];
                let (oj, ui) = (&mut out[j * k + li..(j + 1) * k], &u.data[i * k + li..(i + 1) * k]);
                for (o, v) in oj.iter_mut().zip(ui) {
                    *o += m * v;
                }
            }
        });
        out.chunks(k).flat_map(|row| u.unsort(row)).collect()
    }
}

/// Row-major `n x k` weights with columns sorted by scale. Row `i` is
/// negligible (beyond the cutoff) in all columns before `first[i]`.
struct WeightMatrix {
    data: Vec<f64>,
    k: usize,
    /// `order[c]` is the original index of sorted column `c`.
    order: Vec<usize>,
    first: Vec<usize>,
}

impl WeightMatrix {
    fn unsort(&self, sorted: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.k];
        for (c, &o) in self.order.iter().enumerate() {
            out[o] = sorted[c];
        }
        out
    }

    /// Row `i` in the original column order.
    fn row(&self, i: usize) -> Vec<f64> {
        self.unsort(&self.data[i * self.k..(i + 1) * self.k])
    }
}

/// Index of the unordered pair `{a, b}` among `p` items, `a, b < p`.
#[inline]
fn pair_index(a: usize, b: usize, p: usize) -> usize {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    lo * p - lo * (lo + 1) / 2 + hi
}

fn combined_scales(h: &[f64]) -> Vec<f64> {
    let p = h.len();
    let mut out = vec![0.0; p * (p + 1) / 2];
    for a in 0..p {
        for b in a..p {
            out[pair_index(a, b, p)] = h[a].hypot(h[b]);
        }
    }
    out
}

/// All estimates `f_h`, `h` in a grid, at one `x`, together with the table
/// of distances `||f_{h'} - f_{h,h'}||_{x,2}`. The table does not depend on
/// `eta`, so one table serves every penalty level.
pub struct KernelGlTable {
    grid: BandwidthGrid,
    xs: Vec<f64>,
    ys: Vec<f64>,
    inv_design: Vec<f64>,
    delta_hat: f64,
    n: usize,
    x: f64,
    /// `dist[h * |H| + h']`.
    dist: Vec<f64>,
}

impl KernelGlTable {
    pub fn new(
        obs: &ObservationSet,
        fx: &MarginalEstimate,
        grid: &BandwidthGrid,
        x: f64,
    ) -> Result<Self> {
        ensure!(!grid.is_empty(), Configuration, "empty bandwidth grid");
        ensure!(fx.delta_hat > 0.0, Argument, "delta_hat must be positive");
        let inv_design = inverse_design_weights(obs, fx);
        let sample = SortedSample::new(&obs.xs, &obs.ys, &inv_design, x);
        let dist = distance_table(&sample, &grid.hx, &grid.hy);
        if let Some(bad) = dist.iter().find(|d| !d.is_finite()) {
            return Err(Error::Estimation(format!("non-finite distance {bad}")));
        }
        Ok(Self {
            grid: grid.clone(),
            xs: obs.xs.clone(),
            ys: obs.ys.clone(),
            inv_design,
            delta_hat: fx.delta_hat,
            n: obs.n(),
            x,
            dist,
        })
    }

    pub fn grid(&self) -> &BandwidthGrid {
        &self.grid
    }

    /// `||f_{h'} - f_{h,h'}||_{x,2}` for candidate indices `h`, `h'`.
    pub fn distance(&self, h: usize, h_prime: usize) -> f64 {
        self.dist[h * self.grid.len() + h_prime]
    }

    pub fn curve(&self, k: usize) -> KernelCurve {
        curve_from_weights(&self.xs, &self.ys, &self.inv_design, self.grid.pair(k), self.x)
    }

    /// Runs the selection for one `eta`.
    pub fn select(&self, eta: f64) -> Result<SelectionTrace<Bandwidth2>> {
        let pairs = self.grid.pairs();
        let sigma = pairs
            .iter()
            .map(|&h| sigma_kernel(h, self.delta_hat, self.n, eta))
            .collect::<Result<Vec<_>>>()?;
        Ok(selection::select(
            pairs,
            sigma,
            |h, hp| self.distance(h, hp),
            prefer_bandwidth,
        ))
    }
}

/// Batched closed form of every GL distance on the grid `hx x hy`.
///
/// With `a = f_{h'}` and `b = f_{h,h'}`,
/// `||a - b||^2 = T1(h') - 2 T2(h, h') + T3(h'')`, each term a bilinear form
/// of x-weight vectors against `M_s[i][j] = phi_s(Y_i - Y_j)` for one combined
/// y-scale `s`. Forms sharing `s` are accumulated in one pass over the pairs.
fn distance_table(sample: &SortedSample, hx: &[f64], hy: &[f64]) -> Vec<f64> {
    let (p, q) = (hx.len(), hy.len());
    let cx = combined_scales(hx);
    let cy = combined_scales(hy);
    let base = sample.weight_matrix(hx);
    let comb = sample.weight_matrix(&cx);
    let comb_rows: Vec<Vec<f64>> = (0..sample.len()).map(|i| comb.row(i)).collect();

    // T1[b'][a'] : ||f_{h'}||^2
    let t1: Vec<Vec<f64>> = hy
        .par_iter()
        .map(|&s| sample.quadratic_forms(std::f64::consts::SQRT_2 * s, &base))
        .collect();
    // T3[e][c] : ||f_{h''}||^2 with x-pair c and y-pair e
    let t3: Vec<Vec<f64>> = cy
        .par_iter()
        .map(|&s| sample.quadratic_forms(std::f64::consts::SQRT_2 * s, &comb))
        .collect();
    // T2[(b, b')][(a, a')] : <f_{h'}, f_{h,h'}>
    let yy: Vec<(usize, usize)> = (0..q).flat_map(|b| (0..q).map(move |bp| (b, bp))).collect();
    let t2: Vec<Vec<f64>> = yy
        .par_iter()
        .map(|&(b, bp)| {
            let s = hy[bp].hypot(cy[pair_index(b, bp, q)]);
            let l = sample.apply(s, &base);
            let mut out = vec![0.0; p * p];
            for i in 0..sample.len() {
                let (ci, li) = (&comb_rows[i], &l[i * p..(i + 1) * p]);
                for a in 0..p {
                    for ap in 0..p {
                        out[a * p + ap] += ci[pair_index(a, ap, p)] * li[ap];
                    }
                }
            }
            out
        })
        .collect();

    let k = p * q;
    let mut dist = vec![0.0; k * k];
    for a in 0..p {
        for b in 0..q {
            for ap in 0..p {
                for bp in 0..q {
                    let sq = t1[bp][ap] - 2.0 * t2[b * q + bp][a * p + ap]
                        + t3[pair_index(b, bp, q)][pair_index(a, ap, p)];
                    dist[(a * q + b) * k + ap * q + bp] = sq.max(0.0).sqrt();
                }
            }
        }
    }
    dist
}

/// Builds the table and selects `h` for one `eta`.
pub fn gl_select_bandwidth(
    obs: &ObservationSet,
    fx: &MarginalEstimate,
    grid: &BandwidthGrid,
    x: f64,
    eta: f64,
) -> Result<(KernelCurve, SelectionTrace<Bandwidth2>)> {
    let table = KernelGlTable::new(obs, fx, grid, x)?;
    let trace = table.select(eta)?;
    Ok((table.curve(trace.chosen_index), trace))
}
