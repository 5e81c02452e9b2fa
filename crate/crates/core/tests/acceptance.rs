//! Acceptance report: one PASS/FAIL line per criterion. Exits non-zero if any
//! criterion fails.

use condens::evaluation::{
    mse, oracle_ratio, run_cell, run_eta_sweep, EstimatorKind, FnCurve, RiskConfig,
};
use condens::gauss::{kernel_l2_1d, kernel_l2_2d, std_normal_pdf};
use condens::kernel_gl::{
    build_bandwidth_grid, double_smoothed_estimate, gl_select_bandwidth, kernel_estimate,
    l2_distance_y, sigma_kernel, Bandwidth2, BandwidthGrid, GridOptions, KernelCurve,
};
use condens::marginal::{DesignDensity, MarginalEstimate};
use condens::projection_gl::{
    build_model_grid, fit_projection, gl_select_model, sigma_projection, BasisSpec, ModelGrid,
    ModelGridOptions, ModelIndex, PenaltyForm,
};
use condens::quadrature::simpson;
use condens::sampling::{generate, Example, ExampleId, ObservationSet};
use condens::selection::TIE_RTOL;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn kernel_cell(ex: ExampleId, x: f64, n: usize, eta: f64, fx_known: bool) -> RiskConfig {
    let mut cfg = RiskConfig::new(ex, EstimatorKind::Kernel, x, n, eta);
    cfg.fx_known = fx_known;
    cfg
}

fn mean_mse(cfg: &RiskConfig) -> f64 {
    run_cell(cfg).expect("cell runs").mse_mean
}

fn within(v: f64, reference: f64) -> bool {
    v >= 0.5 * reference && v <= 3.0 * reference
}

struct Shared {
    ex1_unknown_1000: f64,
}

fn c1(shared: &mut Shared) -> Outcome {
    let reference = [(250, 0.028), (500, 0.009), (1000, 0.006)];
    let mut vals = Vec::new();
    let mut ok = true;
    let mut detail = String::new();
    for (n, p) in reference {
        let v = mean_mse(&kernel_cell(ExampleId::Ex1, 0.5, n, 1.0, false));
        ok &= within(v, p);
        detail += &format!("n={n}: {v:.4} (reference {p}, band [{:.4}, {:.4}]); ", 0.5 * p, 3.0 * p);
        vals.push(v);
    }
    shared.ex1_unknown_1000 = vals[2];
    let decreasing = vals.windows(2).all(|w| w[1] < w[0]);
    detail += &format!("strictly decreasing: {decreasing}");
    outcome(ok && decreasing, detail)
}

fn c2() -> Outcome {
    let cfg = kernel_cell(ExampleId::Ex1, 0.5, 500, 1.0, false);
    let reports = run_eta_sweep(&cfg, &[-0.2, 1.0]).expect("sweep runs");
    let (lo, hi) = (reports[0].mse_mean, reports[1].mse_mean);
    outcome(
        lo >= 10.0 * hi,
        format!("mse(eta=-0.2) = {lo:.4}, mse(eta=1) = {hi:.4}, ratio {:.2} (need >= 10)", lo / hi),
    )
}

fn c3() -> Outcome {
    let v = mean_mse(&kernel_cell(ExampleId::Ex2, 0.5, 1000, 1.0, false));
    outcome(v <= 0.012, format!("mse = {v:.4} (need <= 0.012; reference 0.003)"))
}

fn c4() -> Outcome {
    let cfg = RiskConfig::new(ExampleId::Ex1, EstimatorKind::Projection, 0.5, 1000, 0.5);
    let v = mean_mse(&cfg);
    outcome(within(v, 0.047), format!("mse = {v:.4} (reference 0.047, band [0.0235, 0.141])"))
}

fn c5() -> Outcome {
    let at0 = mean_mse(&kernel_cell(ExampleId::Ex3, 0.0, 1000, 1.0, false));
    let at036 = mean_mse(&kernel_cell(ExampleId::Ex3, 0.36, 1000, 1.0, false));
    outcome(
        at036 >= 2.0 * at0,
        format!("mse(x=0) = {at0:.4}, mse(x=0.36) = {at036:.4}, ratio {:.2} (need >= 2)", at036 / at0),
    )
}

fn c6(shared: &Shared) -> Outcome {
    let known = mean_mse(&kernel_cell(ExampleId::Ex1, 0.5, 1000, 1.0, true));
    let unknown = shared.ex1_unknown_1000;
    let diff = (known - unknown).abs();
    outcome(
        diff <= 0.5 * unknown,
        format!("known {known:.4}, unknown {unknown:.4}, |diff| {diff:.4} (need <= {:.4})", 0.5 * unknown),
    )
}

fn c7() -> Outcome {
    let mut cfg = kernel_cell(ExampleId::Ex1, 0.5, 500, 1.0, false);
    cfg.replications = 20;
    let r = oracle_ratio(&cfg).expect("oracle ratio runs");
    outcome(r.is_finite() && r <= 5.0, format!("median ratio {r:.3} (need <= 5)"))
}

fn random_curve(rng: &mut ChaCha8Rng, k: usize) -> KernelCurve {
    let c: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
    let w: Vec<f64> = (0..k).map(|_| rng.random_range(-0.5..1.0)).collect();
    KernelCurve::new(&c, &w, rng.random_range(0.2..1.5), 0.0).unwrap()
}

fn c8() -> Outcome {
    let obs = generate(ExampleId::Ex1, 200, 11).unwrap();
    let fx = MarginalEstimate::from_parts(DesignDensity::Constant(1.0), 1.0, 1.0, 1e-3);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut closure_ok = true;
    for _ in 0..20 {
        let h = Bandwidth2::new(rng.random_range(0.01..0.5), rng.random_range(0.01..0.5)).unwrap();
        let hp = Bandwidth2::new(rng.random_range(0.01..0.5), rng.random_range(0.01..0.5)).unwrap();
        let hpp = Bandwidth2::new(h.h1.hypot(hp.h1), h.h2.hypot(hp.h2)).unwrap();
        let a = double_smoothed_estimate(&obs, &fx, h, hp, 0.5).unwrap();
        let b = kernel_estimate(&obs, &fx, hpp, 0.5).unwrap();
        closure_ok &= a == b;
    }
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let a = random_curve(&mut rng, 50);
        let b = random_curve(&mut rng, 50);
        let exact = l2_distance_y(&a, &b);
        let lo = a.support().0.min(b.support().0);
        let hi = a.support().1.max(b.support().1);
        let num = simpson(|y| (a.evaluate(y) - b.evaluate(y)).powi(2), lo, hi, 20_000).sqrt();
        worst = worst.max((exact - num).abs());
    }
    outcome(
        closure_ok && worst <= 1e-6,
        format!("closure bitwise: {closure_ok}; max |closed form - quadrature| = {worst:.2e}"),
    )
}

fn c9() -> Outcome {
    let l1 = simpson(std_normal_pdf, -12.0, 12.0, 4800);
    let l2sq = simpson(|t| std_normal_pdf(t).powi(2), -12.0, 12.0, 4800);
    let analytic_l2sq = 1.0 / (2.0 * std::f64::consts::PI.sqrt());
    let e1 = (l1 - 1.0).abs();
    let e2 = (kernel_l2_1d() - l2sq.sqrt()).abs();
    let e3 = (l2sq - analytic_l2sq).abs();
    let e4 = (kernel_l2_2d() - analytic_l2sq).abs();
    let sigma = sigma_kernel(Bandwidth2::new(0.1, 0.1).unwrap(), 1.0, 1000, 1.0).unwrap();
    // The reference 0.35683 was obtained from the rounded 1.12838 / sqrt(10);
    // the exact 4 / (2 sqrt(pi) sqrt(10)) = 0.3568248 sits 5.2e-6 away, so
    // the criterion as stated cannot hold. Both distances are reported.
    let exact = 4.0 / (2.0 * std::f64::consts::PI.sqrt() * 10f64.sqrt());
    let es = (sigma - exact).abs();
    let er = (sigma - 0.35683).abs();
    let worst = e1.max(e2).max(e3).max(e4);
    outcome(
        worst <= 1e-10 && er <= 1e-6,
        format!(
            "max norm error {worst:.2e}; sigma = {sigma:.7}; |sigma - 0.35683| = {er:.1e}; |sigma - closed form| = {es:.1e}"
        ),
    )
}

/// `n_lk / (n_l |B_k|)` written out from counts, independently of the solver.
fn histogram_ratio(obs: &ObservationSet, spec: &BasisSpec, m: ModelIndex, x: f64, y: f64, delta: f64, eta: f64) -> f64 {
    let w = 4.0 * spec.a / 2f64.powi(m.m1 as i32);
    let origin = spec.x_center - 2.0 * spec.a;
    let cell_of = |u: f64| ((u - origin) / w).floor();
    let bw = (spec.y_hi - spec.y_lo) / 2f64.powi(m.m2 as i32);
    let ycell = |v: f64| ((v - spec.y_lo) / bw).floor();
    let cx = cell_of(x);
    let in_cell: Vec<f64> = obs
        .xs
        .iter()
        .zip(&obs.ys)
        .filter(|(&xi, _)| cell_of(xi) == cx)
        .map(|(_, &yi)| yi)
        .collect();
    let gram = in_cell.len() as f64 / obs.n() as f64 / w;
    if gram <= (1.0 + eta).powf(-0.4) * delta {
        return 0.0;
    }
    if y < spec.y_lo || y >= spec.y_hi {
        return 0.0;
    }
    let k = ycell(y);
    let nk = in_cell
        .iter()
        .filter(|&&v| v >= spec.y_lo && v < spec.y_hi && ycell(v) == k)
        .count() as f64;
    nk / (in_cell.len() as f64 * bw)
}

fn c10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst: f64 = 0.0;
    for t in 0..100 {
        let n = rng.random_range(20..300);
        let obs = generate(ExampleId::ALL[t % 4], n, t as u64).unwrap();
        let x = rng.random_range(0.0..1.0);
        let spec = BasisSpec::from_sample(&obs.ys, x, rng.random_range(0.2..1.0), 0, 0).unwrap();
        let m = ModelIndex::new(rng.random_range(0..5), rng.random_range(0..7));
        let delta = rng.random_range(0.05..1.0);
        let fit = fit_projection(&obs, m, &spec, x, delta, 0.5).unwrap();
        for _ in 0..20 {
            let y = rng.random_range(spec.y_lo..spec.y_hi);
            worst = worst.max((fit.evaluate(y) - histogram_ratio(&obs, &spec, m, x, y, delta, 0.5)).abs());
        }
    }
    // PSD and symmetric Gram blocks for r up to 3
    let mut psd = true;
    for t in 0..40 {
        let obs = generate(ExampleId::ALL[t % 4], 200, 100 + t as u64).unwrap();
        let r = t % 4;
        let spec = BasisSpec::from_sample(&obs.ys, 0.5, 0.5, r, 1).unwrap();
        let fit = fit_projection(&obs, ModelIndex::new((t % 3) as u32, 2), &spec, 0.5, 0.1, 1.0).unwrap();
        let k = r + 1;
        let g = nalgebra::DMatrix::from_row_slice(k, k, &fit.gram);
        psd &= (0..k).all(|i| (0..k).all(|j| g[(i, j)] == g[(j, i)]));
        psd &= g.symmetric_eigenvalues().iter().all(|&e| e >= -1e-12);
    }
    // Adversarial: r = 1 with all design points at one location is singular.
    let obs = ObservationSet::from_data(vec![0.3; 50], (0..50).map(|i| i as f64 / 50.0).collect(), vec![], ExampleId::Ex1).unwrap();
    let spec = BasisSpec::new(0.25, 0.5, (0.0, 1.0), 1, 0).unwrap();
    let singular = fit_projection(&obs, ModelIndex::new(1, 2), &spec, 0.4, 1e-9, 1.0).unwrap();
    let mut dichotomy = singular.thresholded && singular.coefficients.iter().all(|&c| c == 0.0);
    // Gram exactly at, and just above, the threshold.
    let obs = ObservationSet::from_data(vec![0.5; 10], vec![0.5; 10], vec![], ExampleId::Ex1).unwrap();
    let spec0 = BasisSpec::new(0.25, 0.5, (0.0, 1.0), 0, 0).unwrap();
    let g = fit_projection(&obs, ModelIndex::new(0, 0), &spec0, 0.5, 1.0, 0.0).unwrap().gram_min_eig;
    let at = fit_projection(&obs, ModelIndex::new(0, 0), &spec0, 0.5, g, 0.0).unwrap();
    let above = fit_projection(&obs, ModelIndex::new(0, 0), &spec0, 0.5, g * (1.0 - 1e-12), 0.0).unwrap();
    dichotomy &= at.thresholded && at.coefficients.iter().all(|&c| c == 0.0);
    dichotomy &= !above.thresholded && above.coefficients.iter().any(|&c| c != 0.0);
    outcome(
        worst <= 1e-12 && psd && dichotomy,
        format!("max |matrix - ratio| = {worst:.2e}; Gram symmetric PSD: {psd}; threshold dichotomy: {dichotomy}"),
    )
}

fn c11() -> Outcome {
    let obs = generate(ExampleId::Ex1, 300, 5).unwrap();
    let fx = MarginalEstimate::from_parts(DesignDensity::Constant(1.0), 0.9, 1.1, 1e-3);
    let grid = build_bandwidth_grid(300, fx.delta_hat, &GridOptions::default()).unwrap();
    let (_, kt) = gl_select_bandwidth(&obs, &fx, &grid, 0.5, 1.0).unwrap();
    let a_nonneg = kt.records.iter().all(|r| r.a >= 0.0);
    let best = kt.records.iter().map(|r| r.objective).fold(f64::INFINITY, f64::min);
    let argmin_ok = kt.chosen_record().objective <= best * (1.0 + TIE_RTOL)
        && (kt.chosen_record().objective - kt.chosen_record().a - kt.chosen_record().sigma).abs() < 1e-15;

    let single = BandwidthGrid::from_axes(vec![0.2], vec![0.3], 300, 0.9).unwrap();
    let (_, st) = gl_select_bandwidth(&obs, &fx, &single, 0.5, 1.0).unwrap();
    let single_ok = st.chosen_index == 0 && st.records.len() == 1 && st.records[0].a == 0.0;

    let spec = BasisSpec::from_sample(&obs.ys, 0.5, 0.25, 0, 0).unwrap();
    let mgrid = build_model_grid(300, 0.9, &spec, &ModelGridOptions::default()).unwrap();
    let (_, pt) = gl_select_model(&obs, &fx, &mgrid, &spec, 0.5, 1.0, PenaltyForm::Simplified).unwrap();
    let p_a_nonneg = pt.records.iter().all(|r| r.a >= 0.0);
    let pbest = pt.records.iter().map(|r| r.objective).fold(f64::INFINITY, f64::min);
    let p_argmin = pt.chosen_record().objective <= pbest * (1.0 + TIE_RTOL);
    let one = ModelGrid::from_models(vec![ModelIndex::new(1, 3)]).unwrap();
    let (_, ot) = gl_select_model(&obs, &fx, &one, &spec, 0.5, 1.0, PenaltyForm::Simplified).unwrap();
    let p_single = ot.chosen_index == 0 && ot.records[0].a == 0.0;

    let mut monotone = true;
    for form in [PenaltyForm::Simplified, PenaltyForm::Full] {
        for &m in &mgrid.models {
            for &mp in &mgrid.models {
                let s = |k| sigma_projection(k, 0.9, 1.1, 300, 1.0, &spec, form).unwrap();
                monotone &= s(m.meet(mp)) <= s(mp);
            }
        }
    }
    let all = a_nonneg && argmin_ok && single_ok && p_a_nonneg && p_argmin && p_single && monotone;
    outcome(
        all,
        format!(
            "A >= 0: {}; argmin from trace: {}; single candidate: {}; sigma(m^m') <= sigma(m'): {monotone}",
            a_nonneg && p_a_nonneg,
            argmin_ok && p_argmin,
            single_ok && p_single
        ),
    )
}

fn c12() -> Outcome {
    let mut self_err: f64 = 0.0;
    for id in ExampleId::ALL {
        for &x in &[0.0, 0.36, 0.5, 1.0] {
            let ex = Example::from(id);
            let truth = FnCurve(move |y| ex.conditional_density(x, y).unwrap());
            self_err = self_err.max(mse(&truth, id, x, 2048).unwrap());
        }
    }
    let zero = mse(&FnCurve(|_| 0.0), ExampleId::Ex1, 0.5, 2048).unwrap();
    let obs = generate(ExampleId::Ex1, 500, 3).unwrap();
    let fx = MarginalEstimate::from_parts(DesignDensity::Constant(1.0), 1.0, 1.0, 1e-3);
    let mut stab: f64 = 0.0;
    for h in [Bandwidth2::new(0.1, 0.05).unwrap(), Bandwidth2::new(0.3, 0.4).unwrap()] {
        let c = kernel_estimate(&obs, &fx, h, 0.5).unwrap();
        let (a, b) = (mse(&c, ExampleId::Ex1, 0.5, 2048).unwrap(), mse(&c, ExampleId::Ex1, 0.5, 4096).unwrap());
        stab = stab.max((a - b).abs() / a);
    }
    let spec = BasisSpec::from_sample(&obs.ys, 0.5, 0.25, 0, 0).unwrap();
    let fit = fit_projection(&obs, ModelIndex::new(1, 5), &spec, 0.5, 0.5, 1.0).unwrap();
    let (a, b) = (mse(&fit, ExampleId::Ex1, 0.5, 2048).unwrap(), mse(&fit, ExampleId::Ex1, 0.5, 4096).unwrap());
    stab = stab.max((a - b).abs() / a);
    let ok = self_err <= 1e-12 && (zero - 0.31539).abs() <= 1e-4 && stab < 1e-4;
    outcome(
        ok,
        format!("mse(truth, truth) max {self_err:.1e}; mse(0, Ex1@0.5) = {zero:.5}; doubling change {stab:.1e}"),
    )
}

fn c13() -> Outcome {
    let mut cfg = kernel_cell(ExampleId::Ex3, 0.36, 120, 1.0, false);
    cfg.replications = 100;
    cfg.base_seed = 77;
    let full = run_cell(&cfg).unwrap();
    let again = run_cell(&cfg).unwrap();
    let repeat = full == again;
    let halves: Vec<f64> = [77u64, 127]
        .iter()
        .flat_map(|&seed| {
            let c = RiskConfig {
                replications: 50,
                base_seed: seed,
                ..cfg.clone()
            };
            run_cell(&c).unwrap().per_replication
        })
        .collect();
    let stitched = halves == full.per_replication;
    let pcfg = RiskConfig {
        estimator: EstimatorKind::Projection,
        replications: 5,
        ..cfg.clone()
    };
    let prepeat = run_cell(&pcfg).unwrap() == run_cell(&pcfg).unwrap();
    outcome(
        repeat && stitched && prepeat,
        format!("repeat identical: {}; N=100 == 50 + 50: {stitched}", repeat && prepeat),
    )
}

fn main() {
    let mut shared = Shared { ex1_unknown_1000: f64::NAN };
    let mut failed = 0;
    let mut run = |id: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        println!(
            "criterion {id:>2} [{}] {name}: {} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
        if !o.pass {
            failed += 1;
        }
    };
    run(8, "Gaussian closure and closed-form distance", &mut c8);
    run(9, "kernel norms and sigma reference", &mut c9);
    run(10, "projection r=0 dual path, Gram PSD, threshold", &mut c10);
    run(11, "GL selection identities", &mut c11);
    run(12, "MSE oracle and quadrature stability", &mut c12);
    run(13, "determinism and replication stitching", &mut c13);
    run(1, "kernel Ex1 x=0.5 table values", &mut || c1(&mut shared));
    run(2, "kernel eta explosion Ex1 n=500", &mut c2);
    run(3, "kernel Ex2 x=0.5 n=1000", &mut c3);
    run(4, "projection Ex1 x=0.5 n=1000 eta=0.5", &mut c4);
    run(5, "design-density effect Ex3", &mut c5);
    run(6, "f_X known vs unknown Ex1 n=1000", &mut || c6(&shared));
    run(7, "oracle-ratio boundedness", &mut c7);
    println!("acceptance: {} of 13 criteria failed", failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
