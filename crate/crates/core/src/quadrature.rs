//! Composite Simpson and Gauss-Legendre rules.

use crate::legendre::legendre_with_derivative;

/// Composite Simpson rule with `intervals` subintervals (rounded up to even).
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    simpson_with_ends(&f, a, b, intervals, f(a), f(b))
}

fn simpson_with_ends<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, intervals: usize, fa: f64, fb: f64) -> f64 {
    let m = intervals.max(2).next_multiple_of(2);
    let h = (b - a) / m as f64;
    let mut acc = fa + fb;
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * i as f64);
    }
    acc * h / 3.0
}

/// Simpson rule applied separately between consecutive breakpoints so that
/// jumps of the integrand never fall inside a panel. `total_intervals` is
/// shared among the pieces in proportion to their length, with at least two
/// intervals per piece. Piece endpoints are evaluated as one-sided limits
/// (just inside the piece).
pub fn simpson_piecewise<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    total_intervals: usize,
) -> f64 {
    let mut knots: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&t| t > a && t < b)
        .collect();
    knots.push(a);
    knots.push(b);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let width = b - a;
    knots
        .windows(2)
        .map(|w| {
            let share = ((w[1] - w[0]) / width * total_intervals as f64).ceil() as usize;
            let eps = (w[1] - w[0]) * 1e-13;
            let (fa, fb) = (f(w[0] + eps), f(w[1] - eps));
            simpson_with_ends(&f, w[0], w[1], share.max(2), fa, fb)
        })
        .sum()
}

/// Nodes and weights of the `k`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(k: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(k > 0, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; k];
    let mut weights = vec![0.0; k];
    let kf = k as f64;
    for i in 0..k.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_k.
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (kf + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(k, t);
            let step = p / dp;
            t -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(k, t);
        let w = 2.0 / ((1.0 - t * t) * dp * dp);
        nodes[i] = -t;
        nodes[k - 1 - i] = t;
        weights[i] = w;
        weights[k - 1 - i] = w;
    }
    if k % 2 == 1 {
        nodes[k / 2] = 0.0;
    }
    (nodes, weights)
}
