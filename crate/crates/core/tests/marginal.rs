use condens::marginal::{
    gl_select_marginal_on_grid, marginal_grid, marginal_penalty, rule_of_thumb_bandwidth, NeighborhoodRate,
};
use condens::sampling::true_marginal_density;
use condens::{generate, gl_select_marginal, oracle_marginal, ExampleId, MarginalConfig};

#[test]
fn rule_of_thumb_on_a_hand_sample() {
    // mean 3, sd sqrt(2.5), linear-interpolated quartiles 2 and 4.
    let xs = [5.0, 1.0, 4.0, 2.0, 3.0];
    let spread = 2.5f64.sqrt().min(2.0 / 1.34);
    let want = 1.06 * spread * 5f64.powf(-0.2);
    assert!((rule_of_thumb_bandwidth(&xs).unwrap() - want).abs() < 1e-14);
    assert!(rule_of_thumb_bandwidth(&[1.0]).is_err());
    assert!(rule_of_thumb_bandwidth(&[2.0, 2.0, 2.0]).is_err());
}

#[test]
fn penalty_and_grid_formulas() {
    let k2 = 1.0 / (2.0 * std::f64::consts::PI.sqrt()).sqrt();
    let (n, h, p, c) = (400, 0.1, 1.3, 2.2);
    let want = c * k2 * 2.0 * (0.1f64.ln().abs() * p / (400.0 * 0.1)).sqrt();
    assert!((marginal_penalty(n, h, p, c) - want).abs() < 1e-14);
    let g = marginal_grid(0.2, 5);
    assert!((g[0] - 0.05).abs() < 1e-15 && (g[4] - 0.8).abs() < 1e-12);
    assert!(g.windows(2).all(|w| (w[1] / w[0] - 2.0).abs() < 1e-12));
}

#[test]
fn oracle_bounds_are_the_extremes_over_the_neighborhood() {
    let cfg = MarginalConfig::default();
    let n = 1000;
    let est = oracle_marginal(ExampleId::Ex3, 0.36, n, &cfg).unwrap();
    let half = 2.0 * cfg.neighborhood_halfwidth_a / (n as f64).ln();
    let vals: Vec<f64> = (0..cfg.neighborhood_grid_points)
        .map(|i| 0.36 - half + 2.0 * half * i as f64 / (cfg.neighborhood_grid_points - 1) as f64)
        .map(|t| true_marginal_density(ExampleId::Ex3, t))
        .collect();
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let max = vals.iter().copied().fold(0.0, f64::max);
    assert!((est.delta_hat - min).abs() < 1e-15);
    assert!((est.sup_hat - max).abs() < 1e-15);
    assert_eq!(est.evaluate(0.2), true_marginal_density(ExampleId::Ex3, 0.2));
}

#[test]
fn estimate_is_consistent() {
    let cfg = MarginalConfig::default();
    for (id, x) in [(ExampleId::Ex1, 0.5), (ExampleId::Ex3, 1.0), (ExampleId::Ex3, 0.0)] {
        let obs = generate(id, 20_000, 2).unwrap();
        let est = gl_select_marginal(&obs.marginal_xs, x, &cfg).unwrap();
        let truth = true_marginal_density(id, x);
        assert!((est.evaluate(x) - truth).abs() < 0.12 * truth, "{id} x={x}: {} vs {truth}", est.evaluate(x));
        assert!(est.delta_hat <= est.evaluate(x) + 1e-12 && est.evaluate(x) <= est.sup_hat + 1e-12);
    }
}

#[test]
fn delta_is_floored_far_from_the_data() {
    let obs = generate(ExampleId::Ex1, 200, 1).unwrap();
    let est = gl_select_marginal(&obs.marginal_xs, 25.0, &MarginalConfig::default()).unwrap();
    assert_eq!(est.delta_hat, 1.0 / 200.0);
    assert_eq!(est.floor, 1.0 / 200.0);
    let cfg = MarginalConfig {
        delta_floor: Some(0.01),
        ..MarginalConfig::default()
    };
    assert_eq!(gl_select_marginal(&obs.marginal_xs, 25.0, &cfg).unwrap().delta_hat, 0.01);
}

#[test]
fn single_bandwidth_is_selected_trivially() {
    let obs = generate(ExampleId::Ex3, 300, 7).unwrap();
    let est = gl_select_marginal_on_grid(&obs.marginal_xs, 0.0, &[0.07], &MarginalConfig::default()).unwrap();
    assert_eq!(est.selected_bandwidth, Some(0.07));
    let trace = est.trace.unwrap();
    assert_eq!(trace.records[0].a, 0.0);
}

#[test]
fn configuration_is_validated() {
    let xs = [0.1, 0.4, 0.5, 0.9];
    let bad = [
        MarginalConfig {
            grid_size: 0,
            ..MarginalConfig::default()
        },
        MarginalConfig {
            neighborhood_halfwidth_a: 0.0,
            ..MarginalConfig::default()
        },
        MarginalConfig {
            k_n: NeighborhoodRate::Fixed(0.5),
            ..MarginalConfig::default()
        },
        MarginalConfig {
            delta_floor: Some(-1.0),
            ..MarginalConfig::default()
        },
    ];
    for cfg in bad {
        assert!(gl_select_marginal(&xs, 0.5, &cfg).is_err(), "{cfg:?}");
    }
}
