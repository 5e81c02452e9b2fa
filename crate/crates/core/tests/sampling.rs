use condens::sampling::{true_conditional_density, true_marginal_density};
use condens::{generate, Example, ExampleId, Noise};
use statrs::distribution::{Cauchy, ContinuousCDF, Normal};

/// Kolmogorov-Smirnov statistic of `sample` against `cdf`.
fn ks_statistic(mut sample: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

/// Critical value at level 0.001.
fn ks_critical(n: usize) -> f64 {
    1.95 / (n as f64).sqrt()
}

fn std_normal_cdf(z: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().cdf(z)
}

fn trapezoid(f: impl Fn(f64) -> f64, lo: f64, hi: f64, steps: usize) -> f64 {
    let h = (hi - lo) / steps as f64;
    let inner: f64 = (1..steps).map(|i| f(lo + i as f64 * h)).sum();
    h * (0.5 * (f(lo) + f(hi)) + inner)
}

#[test]
fn location_scale_residuals_are_standard() {
    let n = 4000;
    for (id, loc, var) in [
        (ExampleId::Ex1, (|x: f64| 2.0 * x * x + 5.0) as fn(f64) -> f64, (|x: f64| 1.3 - x.abs()) as fn(f64) -> f64),
        (ExampleId::Ex3, |x: f64| x * x + 1.0, |x: f64| 1.3 + x.abs()),
    ] {
        let obs = generate(id, n, 21).unwrap();
        let z: Vec<f64> = obs
            .xs
            .iter()
            .zip(&obs.ys)
            .map(|(&x, &y)| (y - loc(x)) / var(x).sqrt())
            .collect();
        let d = ks_statistic(z, std_normal_cdf);
        assert!(d < ks_critical(n), "{id}: KS {d}");
    }
}

#[test]
fn cauchy_variant_has_cauchy_residuals() {
    let n = 4000;
    let ex = Example {
        id: ExampleId::Ex1,
        noise: Noise::Cauchy,
    };
    let obs = generate(ex, n, 5).unwrap();
    let z: Vec<f64> = obs
        .xs
        .iter()
        .zip(&obs.ys)
        .map(|(&x, &y)| (y - 2.0 * x * x - 5.0) / (1.3 - x.abs()).sqrt())
        .collect();
    let cauchy = Cauchy::new(0.0, 1.0).unwrap();
    let d = ks_statistic(z, |t| cauchy.cdf(t));
    assert!(d < ks_critical(n), "KS {d}");
}

#[test]
fn mixture_examples_pass_the_probability_integral_transform() {
    let n = 4000;
    for id in [ExampleId::Ex2, ExampleId::Ex4] {
        let obs = generate(id, n, 8).unwrap();
        let u: Vec<f64> = obs
            .xs
            .iter()
            .zip(&obs.ys)
            .map(|(&x, &y)| {
                let exp_part = if y >= 2.0 { 1.0 - (-2.0 * (y - 2.0)).exp() } else { 0.0 };
                0.75 * std_normal_cdf(y / (2.0 + x)) + 0.25 * exp_part
            })
            .collect();
        let d = ks_statistic(u, |t| t.clamp(0.0, 1.0));
        assert!(d < ks_critical(n), "{id}: KS {d}");
    }
}

#[test]
fn designs_follow_their_laws() {
    let n = 4000;
    let a = Normal::new(0.0, 1.0 / 9.0).unwrap();
    let b = Normal::new(1.0, 0.25).unwrap();
    for id in ExampleId::ALL {
        let obs = generate(id, n, 13).unwrap();
        for xs in [&obs.xs, &obs.marginal_xs] {
            let d = if id.uniform_design() {
                ks_statistic(xs.to_vec(), |t| t.clamp(0.0, 1.0))
            } else {
                ks_statistic(xs.to_vec(), |t| 0.5 * a.cdf(t) + 0.5 * b.cdf(t))
            };
            assert!(d < ks_critical(n), "{id}: KS {d}");
        }
        assert_ne!(obs.xs, obs.marginal_xs);
    }
}

#[test]
fn ex3_design_density_at_zero() {
    let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let expected = 0.5 * 9.0 * phi(0.0) + 0.5 * 4.0 * phi(-4.0);
    let got = true_marginal_density(ExampleId::Ex3, 0.0);
    assert!((got - expected).abs() < 1e-12);
    assert!((got - 1.7955).abs() < 1e-4);
    assert_eq!(true_marginal_density(ExampleId::Ex1, 0.3), 1.0);
    assert_eq!(true_marginal_density(ExampleId::Ex2, 1.2), 0.0);
}

#[test]
fn conditional_densities_integrate_to_one() {
    for id in ExampleId::ALL {
        for x in [0.0, 0.36, 0.5, 1.0] {
            let f = |y: f64| true_conditional_density(id, x, y).unwrap();
            // Split at the jump of the exponential component.
            let mass = trapezoid(f, -40.0, 2.0 - 1e-12, 200_000) + trapezoid(f, 2.0, 60.0, 200_000);
            assert!((mass - 1.0).abs() < 1e-6, "{id} x={x}: {mass}");
        }
    }
}

#[test]
fn ex2_tail_fraction_matches_theory() {
    let n = 40_000;
    let obs = generate(ExampleId::Ex2, n, 3).unwrap();
    let empirical = obs.ys.iter().filter(|&&y| y >= 2.0).count() as f64 / n as f64;
    // E_X[0.75 P(N(0, (2+X)^2) >= 2) + 0.25] with X uniform on [0, 1].
    let theory = 0.25 + 0.75 * trapezoid(|x| 1.0 - std_normal_cdf(2.0 / (2.0 + x)), 0.0, 1.0, 2000);
    let se = (theory * (1.0 - theory) / n as f64).sqrt();
    assert!((empirical - theory).abs() < 5.0 * se, "{empirical} vs {theory}");
}

#[test]
fn ex3_mean_matches_theory() {
    let n = 40_000;
    let obs = generate(ExampleId::Ex3, n, 4).unwrap();
    let mean = obs.ys.iter().sum::<f64>() / n as f64;
    // E[X^2 + 1] with X ~ 0.5 N(0, 1/81) + 0.5 N(1, 1/16).
    let theory = 1.0 + 0.5 / 81.0 + 0.5 * (1.0 + 1.0 / 16.0);
    let var = obs.ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!((mean - theory).abs() < 5.0 * (var / n as f64).sqrt(), "{mean} vs {theory}");
}

#[test]
fn regeneration_is_exact_and_seeds_differ() {
    let a = generate(ExampleId::Ex4, 300, 99).unwrap();
    let b = generate(ExampleId::Ex4, 300, 99).unwrap();
    let c = generate(ExampleId::Ex4, 300, 100).unwrap();
    assert_eq!(a.xs, b.xs);
    assert_eq!(a.ys, b.ys);
    assert_eq!(a.marginal_xs, b.marginal_xs);
    assert_ne!(a.ys, c.ys);
}

#[test]
fn example_one_rejects_points_outside_its_domain() {
    assert!(true_conditional_density(ExampleId::Ex1, 1.3, 5.0).is_err());
    assert!(true_conditional_density(ExampleId::Ex1, -1.5, 5.0).is_err());
    assert!(true_conditional_density(ExampleId::Ex3, 5.0, 5.0).is_ok());
}

#[test]
fn ex2_point_values() {
    let phi = |y: f64, s: f64| (-0.5 * (y / s).powi(2)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
    let at0 = true_conditional_density(ExampleId::Ex2, 0.5, 0.0).unwrap();
    assert!((at0 - 0.75 / (2.5 * (2.0 * std::f64::consts::PI).sqrt())).abs() < 1e-14);
    // The exponential branch is closed at y = 2.
    let at2 = true_conditional_density(ExampleId::Ex2, 0.5, 2.0).unwrap();
    assert!((at2 - (0.75 * phi(2.0, 2.5) + 0.5)).abs() < 1e-14);
    assert!((at2 - 0.5869).abs() < 1e-4);
}
