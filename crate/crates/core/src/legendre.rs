//! Legendre polynomials on `[-1, 1]`.

/// `P_d(t)` by the three-term recurrence.
pub fn legendre(d: usize, t: f64) -> f64 {
    legendre_with_derivative(d, t).0
}

/// `(P_d(t), P_d'(t))`.
pub fn legendre_with_derivative(d: usize, t: f64) -> (f64, f64) {
    if d == 0 {
        return (1.0, 0.0);
    }
    let (mut prev, mut cur) = (1.0, t);
    for k in 1..d {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * t * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    let df = d as f64;
    let deriv = if (t * t - 1.0).abs() < 1e-300 {
        // P_d'(+-1) = (+-1)^{d+1} d(d+1)/2
        let s = if t > 0.0 || d % 2 == 1 { 1.0 } else { -1.0 };
        s * df * (df + 1.0) / 2.0
    } else {
        df * (t * cur - prev) / (t * t - 1.0)
    };
    (cur, deriv)
}
