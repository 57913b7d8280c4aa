//! Composite Gauss–Legendre quadrature and central finite differences.
//!
//! The integrands met in this crate are smooth in the integration variable
//! (they follow the deterministic flow), so a fixed composite rule is used
//! instead of an adaptive one. Node positions never depend on the integrand
//! parameters, which keeps nested evaluations smooth under differentiation.

use crate::error::{Error, Result};

/// Gauss–Legendre rule on the reference interval `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds an `n`-point rule by Newton iteration on the Legendre recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 {
                    let (_, d) = legendre_with_derivative(n, x);
                    dp = d;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Gauss–Legendre rule repeated over equal-width panels.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeGaussLegendre {
    rule: GaussLegendre,
    panels: usize,
}

impl CompositeGaussLegendre {
    pub fn new(panels: usize, nodes_per_panel: usize) -> Self {
        assert!(panels >= 1, "composite rule needs at least one panel");
        Self {
            rule: GaussLegendre::new(nodes_per_panel),
            panels,
        }
    }

    pub fn panels(&self) -> usize {
        self.panels
    }

    pub fn nodes_per_panel(&self) -> usize {
        self.rule.len()
    }

    /// Total number of integrand evaluations per call.
    pub fn evaluations(&self) -> usize {
        self.panels * self.rule.len()
    }

    /// Same node rule with twice as many panels.
    pub fn refined(&self) -> Self {
        Self {
            rule: self.rule.clone(),
            panels: self.panels * 2,
        }
    }

    /// Visits every `(abscissa, weight)` pair of the rule mapped onto `[a, b]`.
    pub fn for_each_node(&self, a: f64, b: f64, mut visit: impl FnMut(f64, f64)) {
        let h = (b - a) / self.panels as f64;
        let half = 0.5 * h;
        for p in 0..self.panels {
            let mid = a + (p as f64 + 0.5) * h;
            for (xi, wi) in self.rule.nodes.iter().zip(&self.rule.weights) {
                visit(mid + half * xi, half * wi);
            }
        }
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        if a == b {
            return 0.0;
        }
        let mut sum = 0.0;
        self.for_each_node(a, b, |s, w| sum += w * f(s));
        sum
    }

    /// Integrates with this rule and with twice the panels; fails when the two
    /// estimates differ by more than `rel_tol * max(1, |fine|)`.
    pub fn integrate_checked(
        &self,
        a: f64,
        b: f64,
        rel_tol: f64,
        mut f: impl FnMut(f64) -> f64,
    ) -> Result<f64> {
        let coarse = self.integrate(a, b, &mut f);
        let fine = self.refined().integrate(a, b, &mut f);
        if !fine.is_finite() {
            return Err(Error::Numeric(format!(
                "quadrature on [{a}, {b}] produced a non-finite value ({fine})"
            )));
        }
        let diff = (fine - coarse).abs();
        if diff > rel_tol * fine.abs().max(1.0) {
            return Err(Error::Numeric(format!(
                "quadrature on [{a}, {b}] did not converge: {} panels gave {coarse:e}, {} gave {fine:e} (|diff| = {diff:e}, tol = {rel_tol:e})",
                self.panels,
                self.panels * 2
            )));
        }
        Ok(fine)
    }
}

/// First and second derivative estimates at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivatives {
    pub first: f64,
    pub second: f64,
}

/// Three-point central differences with step `h`.
pub fn central_differences(h: f64, mut f: impl FnMut(f64) -> f64, at: f64) -> Derivatives {
    let fp = f(at + h);
    let f0 = f(at);
    let fm = f(at - h);
    Derivatives {
        first: (fp - fm) / (2.0 * h),
        second: (fp - 2.0 * f0 + fm) / (h * h),
    }
}

/// Central differences at steps `h` and `h/2` combined by one Richardson
/// step; both stencils are second order so the combination is fourth order.
pub fn richardson_differences(h: f64, mut f: impl FnMut(f64) -> f64, at: f64) -> Derivatives {
    let coarse = central_differences(h, &mut f, at);
    let fine = central_differences(0.5 * h, &mut f, at);
    Derivatives {
        first: richardson(coarse.first, fine.first, 2),
        second: richardson(coarse.second, fine.second, 2),
    }
}

/// Eliminates the leading `h^order` error term from a step-halving pair.
pub fn richardson(coarse: f64, fine: f64, order: i32) -> f64 {
    let k = 2f64.powi(order);
    fine + (fine - coarse) / (k - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_point_rule_matches_closed_form() {
        let r = GaussLegendre::new(3);
        let x = (3.0f64 / 5.0).sqrt();
        assert!((r.nodes()[0] + x).abs() < 1e-15);
        assert!(r.nodes()[1].abs() < 1e-15);
        assert!((r.nodes()[2] - x).abs() < 1e-15);
        assert!((r.weights()[0] - 5.0 / 9.0).abs() < 1e-15);
        assert!((r.weights()[1] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn weights_sum_to_two() {
        for n in 1..40 {
            let r = GaussLegendre::new(n);
            let s: f64 = r.weights().iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n = {n}: {s}");
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        let r = CompositeGaussLegendre::new(1, 8);
        // x^15 on [0, 2]
        let v = r.integrate(0.0, 2.0, |x| x.powi(15));
        let exact = 2f64.powi(16) / 16.0;
        assert!((v - exact).abs() / exact < 1e-13);
    }

    #[test]
    fn composite_integrates_smooth_function() {
        let r = CompositeGaussLegendre::new(16, 8);
        let v = r.integrate(0.0, 10.0, |x| (-0.3 * x).exp() * x.sin());
        // closed form of ∫ e^{-kx} sin x dx
        let k: f64 = 0.3;
        let exact = (1.0 - (-10.0 * k).exp() * (k * 10f64.sin() + 10f64.cos())) / (1.0 + k * k);
        assert!((v - exact).abs() < 1e-13);
    }

    #[test]
    fn empty_interval_is_zero() {
        let r = CompositeGaussLegendre::new(4, 8);
        assert_eq!(r.integrate(1.5, 1.5, |_| f64::NAN), 0.0);
    }

    #[test]
    fn checked_integration_flags_rough_integrand() {
        let r = CompositeGaussLegendre::new(1, 2);
        let err = r.integrate_checked(0.0, 1.0, 1e-12, |x| if x < 0.3 { 0.0 } else { 1.0 });
        assert!(matches!(err, Err(Error::Numeric(_))));
        let ok = r.integrate_checked(0.0, 1.0, 1e-12, |x| x);
        assert!((ok.unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn richardson_differences_beat_plain_ones() {
        let f = |x: f64| (2.0 * x).sin();
        let x0 = 0.4;
        let exact1 = 2.0 * (0.8f64).cos();
        let exact2 = -4.0 * (0.8f64).sin();
        let plain = central_differences(1e-2, f, x0);
        let rich = richardson_differences(1e-2, f, x0);
        assert!((rich.first - exact1).abs() < (plain.first - exact1).abs());
        assert!((rich.second - exact2).abs() < (plain.second - exact2).abs());
        assert!((rich.first - exact1).abs() < 1e-9);
    }
}
