//! Reference computations that do not share code with `sis-perturb`.

/// Adaptive classical RK4 with step doubling for
/// `dI/dt = I(1-I)β - γI`, local error held near `1e-14`.
pub fn sis_ode_reference(t_end: f64, x: f64, beta: f64, gamma: f64) -> f64 {
    let f = |i: f64| i * (1.0 - i) * beta - gamma * i;
    let step = |i: f64, h: f64| {
        let k1 = f(i);
        let k2 = f(i + 0.5 * h * k1);
        let k3 = f(i + 0.5 * h * k2);
        let k4 = f(i + h * k3);
        i + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    };
    let tol = 1e-14;
    let (mut t, mut i, mut h): (f64, f64, f64) = (0.0, x, 1e-2);
    while t < t_end {
        h = h.min(t_end - t);
        let big = step(i, h);
        let small = step(step(i, 0.5 * h), 0.5 * h);
        let err = (big - small).abs() / 15.0;
        if err <= tol * (1.0 + small.abs()) * h.max(1e-3) {
            t += h;
            i = small + (small - big) / 15.0;
            h *= 1.5;
        } else {
            h *= 0.5;
        }
    }
    i
}

/// Sample Pearson correlation.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let sa = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>().sqrt();
    let sb = b.iter().map(|y| (y - mb).powi(2)).sum::<f64>().sqrt();
    cov / (sa * sb)
}
