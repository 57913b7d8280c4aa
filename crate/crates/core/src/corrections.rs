//! Perturbation-series corrections to moments of the infected fraction.
//!
//! With the perturbation written as `dY = c·ã(Y)dt + √c·b̃(Y)dB`, the moment
//! `u(t,x,y) = E[φ(I_t) | I₀ = x, Y₀ = y]` solves a backward equation whose
//! expansion `u = Σ uₙ cⁿ` is triangular:
//!
//! ```text
//! u₀(t,x,y) = φ(I^D_t(x, y))
//! uₙ(t,x,y) = ∫₀ᵗ [½ b̃²(y) ∂²_y u_{n-1} + ã(y) ∂_y u_{n-1}](s, I^D_{t-s}(x,y), y) ds
//! ```
//!
//! Each line is solved along the characteristic `s ↦ I^D_{t-s}(x, y)` of the
//! deterministic flow, so every term is a one-dimensional integral of
//! finite-difference derivatives of the previous term.
//!
//! The additive-noise model `βdt → βdt + σ̃√c dB` has the analogous
//! expansion in `x` only:
//!
//! ```text
//! g₀(t,x) = φ(I^D_t(x))
//! gₙ(t,x) = ½σ̃² ∫₀ᵗ w(ξ) ∂²_x g_{n-1}(s, ξ) ds,   ξ = I^D_{t-s}(x)
//! ```
//!
//! where `w(ξ) = ξ²(1-ξ)²` is the squared noise profile (see [`GrayWeight`]).

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::diffusions::{CirParams, CoefficientPair, GrayParams, NaturalModel};
use crate::error::{require_finite, require_nonnegative, require_positive, Error, Result};
use crate::quadrature::{
    central_differences, richardson_differences, CompositeGaussLegendre, Derivatives,
};
use crate::sis::{flow_unchecked, integral_form};

/// Highest supported series order.
pub const MAX_ORDER: usize = 2;

/// Relative change tolerated between a term and its refined evaluation.
pub const PLATEAU_TOL: f64 = 1e-4;

/// Which `y`-dependence the finite differences in the recursion act on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeScope {
    /// Differentiate `u_{n-1}(s, ξ, y)` in its own state argument with the
    /// characteristic point `ξ = I^D_{t-s}(x, y)` held fixed. This is what
    /// integrating along characteristics produces.
    StateSlot,
    /// Differentiate `y ↦ u_{n-1}(s, I^D_{t-s}(x, y), y)`, moving the
    /// characteristic point as well.
    Total,
}

impl DerivativeScope {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::StateSlot => "state",
            Self::Total => "total",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "state" => Some(Self::StateSlot),
            "total" => Some(Self::Total),
            _ => None,
        }
    }
}

/// Weight multiplying `½σ̃² ∂²_x` in the additive-noise recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrayWeight {
    /// `x²(1-x)²`: the generator of `dI = … + σ̃√c I(1-I) dB`.
    Generator,
    /// `x(1-x)`.
    Linear,
    /// `1`.
    Unweighted,
}

impl GrayWeight {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Generator => "generator",
            Self::Linear => "linear",
            Self::Unweighted => "unweighted",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "generator" => Some(Self::Generator),
            "linear" => Some(Self::Linear),
            "unweighted" => Some(Self::Unweighted),
            _ => None,
        }
    }

    #[inline]
    fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Generator => {
                let q = x * (1.0 - x);
                q * q
            }
            Self::Linear => x * (1.0 - x),
            Self::Unweighted => 1.0,
        }
    }
}

/// A function `φ` of the infected fraction whose expectation is tracked.
#[derive(Clone)]
pub struct Observable {
    name: String,
    phi: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Observable")
            .field("name", &self.name)
            .finish()
    }
}

impl Observable {
    /// `φ` should be finite on `[0, 1]` and twice differentiable.
    pub fn new(name: impl Into<String>, phi: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            phi: Arc::new(phi),
        }
    }

    pub fn identity() -> Self {
        Self::new("identity", |x| x)
    }

    pub fn square() -> Self {
        Self::new("square", |x| x * x)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.phi)(x)
    }
}

/// Numerical settings of the correction engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionConfig {
    /// Gauss–Legendre panels on `[0, t]`.
    pub panels: usize,
    /// Nodes per panel.
    pub nodes_per_panel: usize,
    /// Relative central-difference step in `y`.
    pub fd_step_y: f64,
    /// Relative central-difference step in `x`.
    pub fd_step_x: f64,
    pub max_order: usize,
    pub richardson: bool,
    pub scope: DerivativeScope,
    pub gray_weight: GrayWeight,
}

impl Default for CorrectionConfig {
    fn default() -> Self {
        Self {
            panels: 16,
            nodes_per_panel: 8,
            fd_step_y: 1e-4,
            fd_step_x: 1e-4,
            max_order: 1,
            richardson: false,
            scope: DerivativeScope::StateSlot,
            gray_weight: GrayWeight::Generator,
        }
    }
}

impl CorrectionConfig {
    pub fn validate(&self) -> Result<()> {
        let nodes = self.panels * self.nodes_per_panel;
        if nodes < 8 || self.panels == 0 || self.nodes_per_panel == 0 {
            return Err(Error::InvalidParameter {
                name: "quad_nodes",
                value: nodes as f64,
                reason: "panels x nodes must be at least 8",
            });
        }
        for (name, h) in [("fd_step_y", self.fd_step_y), ("fd_step_x", self.fd_step_x)] {
            if !(h > 1e-8 && h < 1e-1) {
                return Err(Error::Domain {
                    name,
                    value: h,
                    domain: "(1e-8, 1e-1)",
                });
            }
        }
        if self.max_order > MAX_ORDER {
            return Err(Error::InvalidParameter {
                name: "max_order",
                value: self.max_order as f64,
                reason: "orders above 2 are not supported",
            });
        }
        Ok(())
    }

    /// Twice the panels and half the difference steps.
    pub fn refined(&self) -> Self {
        Self {
            panels: self.panels * 2,
            fd_step_y: self.fd_step_y * 0.5,
            fd_step_x: self.fd_step_x * 0.5,
            ..*self
        }
    }

    fn quadrature(&self) -> CompositeGaussLegendre {
        CompositeGaussLegendre::new(self.panels, self.nodes_per_panel)
    }

    /// Step for differentiating a term of order `level`.
    ///
    /// Terms of order ≥ 1 carry their own difference noise of size
    /// `ε/h²`, so the step is widened to `h^{1/(level+1)}` to keep nested
    /// second differences above that noise.
    fn step(&self, base: f64, level: usize) -> f64 {
        base.powf(1.0 / (level as f64 + 1.0))
    }

    fn differentiate(&self, h: f64, f: impl FnMut(f64) -> f64, at: f64) -> Derivatives {
        if self.richardson {
            richardson_differences(h, f, at)
        } else {
            central_differences(h, f, at)
        }
    }
}

/// Terms `u₀ … u_N` at one point and their sum in powers of `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesEval {
    pub terms: Vec<f64>,
    pub scale_c: f64,
}

impl SeriesEval {
    /// `Σ uₙ cⁿ` at the stored scale.
    pub fn value(&self) -> f64 {
        self.value_at(self.scale_c)
    }

    /// `Σ uₙ cⁿ` at another scale.
    pub fn value_at(&self, c: f64) -> f64 {
        self.terms.iter().rev().fold(0.0, |acc, &u| acc * c + u)
    }
}

/// A term together with a refined re-evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckedTerm {
    pub value: f64,
    pub refined: f64,
    pub rel_change: f64,
    /// Set when the refinement moved the value by more than [`PLATEAU_TOL`].
    pub warning: Option<String>,
}

fn checked(value: f64, refined: f64, what: &str) -> CheckedTerm {
    let diff = (refined - value).abs();
    let rel_change = diff / refined.abs().max(1e-8);
    let warning = (rel_change > PLATEAU_TOL && diff > 1e-10).then(|| {
        format!(
            "{what}: refined evaluation moved the value from {value:e} to {refined:e} (relative change {rel_change:e})"
        )
    });
    CheckedTerm {
        value,
        refined,
        rel_change,
        warning,
    }
}

fn check_point(t: f64, x: f64) -> Result<()> {
    require_nonnegative("t", t)?;
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Domain {
            name: "x",
            value: x,
            domain: "(0, 1)",
        });
    }
    Ok(())
}

fn check_scale(c: f64) -> Result<()> {
    require_finite("c", c)?;
    if !(0.0..1.0).contains(&c) {
        return Err(Error::Domain {
            name: "c",
            value: c,
            domain: "[0, 1)",
        });
    }
    Ok(())
}

/// Correction engine for a natural perturbation.
#[derive(Debug, Clone)]
pub struct NaturalCorrections {
    gamma: f64,
    coeffs: CoefficientPair,
    phi: Observable,
    cfg: CorrectionConfig,
    quad: CompositeGaussLegendre,
}

impl NaturalCorrections {
    pub fn new(
        gamma: f64,
        coeffs: CoefficientPair,
        phi: Observable,
        cfg: CorrectionConfig,
    ) -> Result<Self> {
        require_positive("gamma", gamma)?;
        cfg.validate()?;
        Ok(Self {
            gamma,
            coeffs,
            phi,
            quad: cfg.quadrature(),
            cfg,
        })
    }

    pub fn config(&self) -> &CorrectionConfig {
        &self.cfg
    }

    pub fn with_observable(&self, phi: Observable) -> Self {
        Self {
            phi,
            ..self.clone()
        }
    }

    /// `u₀(t,x,y) = φ(I^D_t(x, y))`.
    pub fn u0(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        check_point(t, x)?;
        require_nonnegative("y", y)?;
        Ok(self.term(0, t, x, y))
    }

    /// `uₙ(t,x,y)` for `n ≤ max_order`.
    pub fn u_n(&self, n: usize, t: f64, x: f64, y: f64) -> Result<f64> {
        check_point(t, x)?;
        require_nonnegative("y", y)?;
        if n > self.cfg.max_order {
            return Err(Error::InvalidParameter {
                name: "n",
                value: n as f64,
                reason: "exceeds the configured max_order",
            });
        }
        let v = self.term(n, t, x, y);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Numeric(format!(
                "u_{n}({t}, {x}, {y}) evaluated to {v}"
            )))
        }
    }

    /// `uₙ` plus a re-evaluation with doubled panels and halved steps.
    pub fn u_n_checked(&self, n: usize, t: f64, x: f64, y: f64) -> Result<CheckedTerm> {
        let value = self.u_n(n, t, x, y)?;
        let fine = Self::new(
            self.gamma,
            self.coeffs.clone(),
            self.phi.clone(),
            self.cfg.refined(),
        )?;
        let refined = fine.u_n(n, t, x, y)?;
        Ok(checked(value, refined, &format!("u_{n}({t}, {x}, {y})")))
    }

    fn term(&self, n: usize, t: f64, x: f64, y: f64) -> f64 {
        if n == 0 {
            return self.phi.eval(flow_unchecked(t, x, y, self.gamma));
        }
        if t == 0.0 {
            return 0.0;
        }
        let drift = self.coeffs.drift_tilde(y);
        let diff = self.coeffs.diffusion_tilde(y);
        let half_b2 = 0.5 * diff * diff;
        if drift == 0.0 && half_b2 == 0.0 {
            return 0.0;
        }
        let h = self.cfg.step(self.cfg.fd_step_y, n - 1) * y.abs().max(1.0);
        let gamma = self.gamma;
        self.quad.integrate(0.0, t, |s| {
            let d = match self.cfg.scope {
                DerivativeScope::StateSlot => {
                    let xi = flow_unchecked(t - s, x, y, gamma);
                    self.cfg
                        .differentiate(h, |yy| self.term(n - 1, s, xi, yy), y)
                }
                DerivativeScope::Total => self.cfg.differentiate(
                    h,
                    |yy| self.term(n - 1, s, flow_unchecked(t - s, x, yy, gamma), yy),
                    y,
                ),
            };
            half_b2 * d.second + drift * d.first
        })
    }

    /// `u₀ … u_N` with `N = max_order`, summed at scale `c`.
    pub fn series(&self, t: f64, x: f64, y: f64, c: f64) -> Result<SeriesEval> {
        check_scale(c)?;
        let terms = (0..=self.cfg.max_order)
            .map(|n| self.u_n(n, t, x, y))
            .collect::<Result<Vec<_>>>()?;
        Ok(SeriesEval { terms, scale_c: c })
    }

    /// Series at every time in `times`, evaluated in parallel.
    pub fn series_curve(&self, times: &[f64], x: f64, y: f64, c: f64) -> Result<Vec<SeriesEval>> {
        times.par_iter().map(|&t| self.series(t, x, y, c)).collect()
    }
}

/// `Σ_{n ≤ N} uₙ cⁿ` for `φ`; convenience wrapper around [`NaturalCorrections`].
#[allow(clippy::too_many_arguments)]
pub fn expectation_series(
    t: f64,
    x: f64,
    y: f64,
    c: f64,
    gamma: f64,
    phi: &Observable,
    coeffs: &CoefficientPair,
    cfg: &CorrectionConfig,
) -> Result<SeriesEval> {
    NaturalCorrections::new(gamma, coeffs.clone(), phi.clone(), *cfg)?.series(t, x, y, c)
}

/// First-order variance `c(u₁⁽²⁾ - 2u₀⁽¹⁾u₁⁽¹⁾)`, where the superscript is
/// the power in `φ(x) = x^k`.
pub fn variance_first_order(
    t: f64,
    x: f64,
    y: f64,
    c: f64,
    gamma: f64,
    coeffs: &CoefficientPair,
    cfg: &CorrectionConfig,
) -> Result<f64> {
    check_scale(c)?;
    let mut cfg = *cfg;
    cfg.max_order = cfg.max_order.max(1);
    let first = NaturalCorrections::new(gamma, coeffs.clone(), Observable::identity(), cfg)?;
    let second = first.with_observable(Observable::square());
    let u0 = first.u0(t, x, y)?;
    let u1 = first.u_n(1, t, x, y)?;
    let u1_sq = second.u_n(1, t, x, y)?;
    Ok(c * (u1_sq - 2.0 * u0 * u1))
}

/// Mean-field approximation for a CIR perturbation: the deterministic flow
/// driven by the time-dependent mean `E[Y_t]`, whose cumulative transmission
/// `∫₀ᵗ E[Y_s] ds = bt + (y - b)(1 - e^{-at})/a` is closed form.
pub fn mean_field_cir(t: f64, x: f64, gamma: f64, cir: &CirParams) -> Result<f64> {
    let (a, b, y) = (cir.a, cir.b, cir.y0);
    let quad = CompositeGaussLegendre::new(32, 8);
    integral_form(
        t,
        x,
        gamma,
        |s| b * s - (y - b) * (-a * s).exp_m1() / a,
        &quad,
    )
}

/// Correction engine for the additive-noise perturbation.
#[derive(Debug, Clone)]
pub struct GrayCorrections {
    params: GrayParams,
    phi: Observable,
    cfg: CorrectionConfig,
    quad: CompositeGaussLegendre,
}

impl GrayCorrections {
    pub fn new(params: GrayParams, phi: Observable, cfg: CorrectionConfig) -> Result<Self> {
        params.validate()?;
        cfg.validate()?;
        Ok(Self {
            params,
            phi,
            quad: cfg.quadrature(),
            cfg,
        })
    }

    pub fn g0(&self, t: f64, x: f64) -> Result<f64> {
        check_point(t, x)?;
        Ok(self.term(0, t, x))
    }

    pub fn g_n(&self, n: usize, t: f64, x: f64) -> Result<f64> {
        check_point(t, x)?;
        if n > self.cfg.max_order {
            return Err(Error::InvalidParameter {
                name: "n",
                value: n as f64,
                reason: "exceeds the configured max_order",
            });
        }
        let v = self.term(n, t, x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Numeric(format!("g_{n}({t}, {x}) evaluated to {v}")))
        }
    }

    pub fn g_n_checked(&self, n: usize, t: f64, x: f64) -> Result<CheckedTerm> {
        let value = self.g_n(n, t, x)?;
        let fine = Self::new(self.params, self.phi.clone(), self.cfg.refined())?;
        let refined = fine.g_n(n, t, x)?;
        Ok(checked(value, refined, &format!("g_{n}({t}, {x})")))
    }

    fn term(&self, n: usize, t: f64, x: f64) -> f64 {
        let GrayParams {
            beta,
            gamma,
            sigma_tilde,
            ..
        } = self.params;
        if n == 0 {
            return self.phi.eval(flow_unchecked(t, x, beta, gamma));
        }
        if t == 0.0 || sigma_tilde == 0.0 {
            return 0.0;
        }
        let half_s2 = 0.5 * sigma_tilde * sigma_tilde;
        let rel = self.cfg.step(self.cfg.fd_step_x, n - 1);
        self.quad.integrate(0.0, t, |s| {
            let xi = flow_unchecked(t - s, x, beta, gamma);
            let w = self.cfg.gray_weight.eval(xi);
            if w == 0.0 {
                return 0.0;
            }
            let d2 = match self.cfg.scope {
                DerivativeScope::StateSlot => {
                    let h = rel * xi.abs().max(1e-12);
                    self.cfg
                        .differentiate(h, |z| self.term(n - 1, s, z), xi)
                        .second
                }
                DerivativeScope::Total => {
                    let h = rel * x;
                    self.cfg
                        .differentiate(
                            h,
                            |z| self.term(n - 1, s, flow_unchecked(t - s, z, beta, gamma)),
                            x,
                        )
                        .second
                }
            };
            half_s2 * w * d2
        })
    }

    pub fn series(&self, t: f64, x: f64, c: f64) -> Result<SeriesEval> {
        check_scale(c)?;
        let terms = (0..=self.cfg.max_order)
            .map(|n| self.g_n(n, t, x))
            .collect::<Result<Vec<_>>>()?;
        Ok(SeriesEval { terms, scale_c: c })
    }

    pub fn series_curve(&self, times: &[f64], x: f64, c: f64) -> Result<Vec<SeriesEval>> {
        times.par_iter().map(|&t| self.series(t, x, c)).collect()
    }
}

/// One row of the CIR versus additive-noise comparison (`φ(x) = x`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonRow {
    pub t: f64,
    pub u0: f64,
    pub g0: f64,
    /// `u₀ + c·u₁` for the CIR perturbation.
    pub cir_first_order: f64,
    /// `g₀ + c·g₁` for the additive-noise perturbation.
    pub gray_first_order: f64,
}

/// First-order expected dynamics under two perturbations with the same
/// constant mean `β`: CIR started at its mean `y = b = β`, and additive noise
/// around `β`.
#[allow(clippy::too_many_arguments)]
pub fn compare_perturbations(
    times: &[f64],
    x: f64,
    beta: f64,
    gamma: f64,
    c: f64,
    cir: &CirParams,
    gray: &GrayParams,
    cfg: &CorrectionConfig,
) -> Result<Vec<ComparisonRow>> {
    check_scale(c)?;
    let tol = 1e-12 * beta.abs().max(1.0);
    if (cir.b - beta).abs() > tol || (cir.y0 - beta).abs() > tol {
        return Err(Error::InconsistentParameters(format!(
            "CIR must start at its mean with y = b = beta (got y = {}, b = {}, beta = {beta})",
            cir.y0, cir.b
        )));
    }
    if (gray.beta - beta).abs() > tol || (gray.gamma - gamma).abs() > tol {
        return Err(Error::InconsistentParameters(format!(
            "additive-noise parameters (beta = {}, gamma = {}) do not match ({beta}, {gamma})",
            gray.beta, gray.gamma
        )));
    }
    let mut cfg = *cfg;
    cfg.max_order = 1;
    let natural = NaturalCorrections::new(
        gamma,
        NaturalModel::Cir(*cir).coefficient_pair(c)?,
        Observable::identity(),
        cfg,
    )?;
    let additive = GrayCorrections::new(*gray, Observable::identity(), cfg)?;
    times
        .par_iter()
        .map(|&t| {
            let u = natural.series(t, x, beta, c)?;
            let g = additive.series(t, x, c)?;
            Ok(ComparisonRow {
                t,
                u0: u.terms[0],
                g0: g.terms[0],
                cir_first_order: u.value(),
                gray_first_order: g.value(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusions::cir_mean;
    use crate::sis::flow;

    fn fig3b_pair() -> (CirParams, CoefficientPair) {
        let cir = CirParams::new(0.02, 0.2, 0.032, 0.2).unwrap();
        (cir, NaturalModel::Cir(cir).coefficient_pair(0.1).unwrap())
    }

    fn engine(phi: Observable, cfg: CorrectionConfig) -> NaturalCorrections {
        NaturalCorrections::new(0.1, fig3b_pair().1, phi, cfg).unwrap()
    }

    #[test]
    fn u0_is_observable_of_flow() {
        let e = engine(Observable::identity(), CorrectionConfig::default());
        assert_eq!(
            e.u0(7.0, 0.3, 0.2).unwrap(),
            flow(7.0, 0.3, 0.2, 0.1).unwrap()
        );
        assert_eq!(e.u0(0.0, 0.3, 0.2).unwrap(), 0.3);
        let sq = e.with_observable(Observable::square());
        assert_eq!(
            sq.u0(7.0, 0.3, 0.2).unwrap(),
            flow(7.0, 0.3, 0.2, 0.1).unwrap().powi(2)
        );
    }

    #[test]
    fn higher_terms_vanish_at_time_zero() {
        let cfg = CorrectionConfig {
            max_order: 2,
            ..Default::default()
        };
        let e = engine(Observable::identity(), cfg);
        assert_eq!(e.u_n(1, 0.0, 0.3, 0.2).unwrap(), 0.0);
        assert_eq!(e.u_n(2, 0.0, 0.3, 0.2).unwrap(), 0.0);
    }

    #[test]
    fn null_perturbation_gives_no_correction() {
        let pair = CoefficientPair::from_fns("null", |_| 0.0, |_| 0.0, 0.1).unwrap();
        let cfg = CorrectionConfig {
            max_order: 2,
            ..Default::default()
        };
        let e = NaturalCorrections::new(0.1, pair, Observable::identity(), cfg).unwrap();
        for t in [0.5, 5.0, 40.0] {
            assert_eq!(e.u_n(1, t, 0.3, 0.2).unwrap(), 0.0);
            assert_eq!(e.u_n(2, t, 0.3, 0.2).unwrap(), 0.0);
        }
    }

    #[test]
    fn order_above_configuration_is_rejected() {
        let e = engine(Observable::identity(), CorrectionConfig::default());
        assert!(e.u_n(2, 1.0, 0.3, 0.2).is_err());
        let bad = CorrectionConfig {
            max_order: 3,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn config_validation() {
        let ok = CorrectionConfig::default();
        assert!(ok.validate().is_ok());
        assert!(CorrectionConfig {
            panels: 1,
            nodes_per_panel: 4,
            ..ok
        }
        .validate()
        .is_err());
        assert!(CorrectionConfig {
            fd_step_y: 0.5,
            ..ok
        }
        .validate()
        .is_err());
        assert!(CorrectionConfig {
            fd_step_x: 1e-9,
            ..ok
        }
        .validate()
        .is_err());
    }

    #[test]
    fn zero_scale_series_is_u0() {
        let e = engine(Observable::identity(), CorrectionConfig::default());
        let s = e.series(12.0, 0.3, 0.2, 0.0).unwrap();
        assert_eq!(s.value(), s.terms[0]);
        assert_eq!(s.terms[0], e.u0(12.0, 0.3, 0.2).unwrap());
    }

    #[test]
    fn first_order_series_is_u0_plus_c_u1() {
        let e = engine(Observable::identity(), CorrectionConfig::default());
        let s = e.series(12.0, 0.3, 0.2, 0.1).unwrap();
        assert_eq!(s.terms.len(), 2);
        assert!((s.value() - (s.terms[0] + 0.1 * s.terms[1])).abs() < 1e-16);
    }

    #[test]
    fn variance_correction_vanishes_without_scale_or_time() {
        let (_, pair) = fig3b_pair();
        let cfg = CorrectionConfig::default();
        assert_eq!(
            variance_first_order(10.0, 0.3, 0.2, 0.0, 0.1, &pair, &cfg).unwrap(),
            0.0
        );
        assert_eq!(
            variance_first_order(0.0, 0.3, 0.2, 0.1, 0.1, &pair, &cfg).unwrap(),
            0.0
        );
    }

    #[test]
    fn mean_field_equals_u0_for_cir_started_at_mean() {
        let (cir, pair) = fig3b_pair();
        let e = NaturalCorrections::new(
            0.1,
            pair,
            Observable::identity(),
            CorrectionConfig::default(),
        )
        .unwrap();
        for t in [0.0, 1.0, 10.0, 50.0] {
            // cumulative transmission is exactly b·t when y = b
            assert_eq!(cir_mean(t, &cir), cir.b);
            let mf = mean_field_cir(t, 0.3, 0.1, &cir).unwrap();
            assert!((mf - e.u0(t, 0.3, 0.2).unwrap()).abs() < 1e-10, "t {t}");
        }
    }

    #[test]
    fn mean_field_follows_moving_mean() {
        let cir = CirParams::new(0.3, 0.5, 0.1, 0.2).unwrap();
        let mf = mean_field_cir(5.0, 0.3, 0.4, &cir).unwrap();
        // RK4 on dI/dt = I(1-I)E[Y_t] - γI
        let n = 50_000;
        let dt = 5.0 / n as f64;
        let f = |t: f64, i: f64| i * (1.0 - i) * cir_mean(t, &cir) - 0.4 * i;
        let mut i = 0.3;
        for k in 0..n {
            let t = k as f64 * dt;
            let k1 = f(t, i);
            let k2 = f(t + 0.5 * dt, i + 0.5 * dt * k1);
            let k3 = f(t + 0.5 * dt, i + 0.5 * dt * k2);
            let k4 = f(t + dt, i + dt * k3);
            i += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        assert!((mf - i).abs() < 1e-10, "{mf} vs {i}");
    }

    #[test]
    fn gray_g0_matches_u0() {
        let gray = GrayParams::from_sigma(0.2, 0.1, 0.032, 0.1).unwrap();
        let g = GrayCorrections::new(gray, Observable::identity(), CorrectionConfig::default())
            .unwrap();
        let u = engine(Observable::identity(), CorrectionConfig::default());
        for t in [0.0, 3.0, 30.0] {
            assert_eq!(g.g0(t, 0.3).unwrap(), u.u0(t, 0.3, 0.2).unwrap());
        }
    }

    #[test]
    fn gray_terms_vanish_without_noise_or_time() {
        let gray = GrayParams::new(0.2, 0.1, 0.0, 0.1).unwrap();
        let cfg = CorrectionConfig {
            max_order: 2,
            ..Default::default()
        };
        let g = GrayCorrections::new(gray, Observable::identity(), cfg).unwrap();
        assert_eq!(g.g_n(1, 10.0, 0.3).unwrap(), 0.0);
        assert_eq!(g.g_n(2, 10.0, 0.3).unwrap(), 0.0);
        let noisy = GrayCorrections::new(
            GrayParams::from_sigma(0.2, 0.1, 0.05, 0.1).unwrap(),
            Observable::identity(),
            cfg,
        )
        .unwrap();
        assert_eq!(noisy.g_n(1, 0.0, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn comparison_requires_matched_means() {
        let cir = CirParams::new(0.02, 0.2, 0.032, 0.25).unwrap();
        let gray = GrayParams::from_sigma(0.2, 0.1, 0.032, 0.1).unwrap();
        let cfg = CorrectionConfig::default();
        assert!(compare_perturbations(&[1.0], 0.3, 0.2, 0.1, 0.1, &cir, &gray, &cfg).is_err());
    }

    #[test]
    fn comparison_at_zero_scale_has_equal_columns() {
        let cir = CirParams::new(0.02, 0.2, 0.032, 0.2).unwrap();
        let gray = GrayParams::new(0.2, 0.1, 0.1, 0.0).unwrap();
        let rows = compare_perturbations(
            &[0.0, 5.0, 20.0],
            0.3,
            0.2,
            0.1,
            0.0,
            &cir,
            &gray,
            &CorrectionConfig::default(),
        )
        .unwrap();
        for r in rows {
            assert_eq!(r.u0, r.g0);
            assert_eq!(r.u0, r.cir_first_order);
            assert_eq!(r.u0, r.gray_first_order);
        }
    }

    #[test]
    fn scope_and_weight_names_round_trip() {
        for s in [DerivativeScope::StateSlot, DerivativeScope::Total] {
            assert_eq!(DerivativeScope::parse(s.as_str()), Some(s));
        }
        for w in [
            GrayWeight::Generator,
            GrayWeight::Linear,
            GrayWeight::Unweighted,
        ] {
            assert_eq!(GrayWeight::parse(w.as_str()), Some(w));
        }
    }
}
