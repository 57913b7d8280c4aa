//! Deterministic SIS dynamics with the population normalised to one, so the
//! susceptible share is always `1 - I`.
//!
//! The infected fraction obeys `dI/dt = I(1 - I)β - γI`, whose flow has the
//! closed form
//!
//! ```text
//! I_t = x e^{t(β-γ)} / (1 + xβ (e^{t(β-γ)} - 1)/(β-γ))
//! ```
//!
//! Written this way the only delicate factor is `(e^{td} - 1)/d`, which is
//! evaluated with `expm1` and replaced by its `d → 0` limit `t` inside the
//! degeneracy band.

use crate::error::{require_finite, require_nonnegative, require_positive, Error, Result};
use crate::quadrature::CompositeGaussLegendre;

/// Below this value of `|β-γ| t / (1 + |β| t)` the `β = γ` limit is used.
pub const DEGENERACY_THRESHOLD: f64 = 1e-9;

/// Above this value of `t(β-γ)` the closed form is divided through by the
/// exponential.
pub const LARGE_EXPONENT: f64 = 30.0;

/// A population share (infected or susceptible).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Fraction(f64);

impl Fraction {
    /// Accepts values in `[0, 1)`.
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::Domain {
                name: "fraction",
                value,
                domain: "[0, 1)",
            })
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Transmission rate, recovery rate and initial infected fraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SisParams {
    pub beta: f64,
    pub gamma: f64,
    pub x0: f64,
}

impl SisParams {
    pub fn new(beta: f64, gamma: f64, x0: f64) -> Result<Self> {
        let p = Self { beta, gamma, x0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        require_nonnegative("beta", self.beta)?;
        require_positive("gamma", self.gamma)?;
        require_open_unit("x0", self.x0)?;
        Ok(())
    }

    pub fn r0(&self) -> f64 {
        self.beta / self.gamma
    }

    pub fn flow(&self, t: f64) -> Result<f64> {
        flow(t, self.x0, self.beta, self.gamma)
    }
}

fn require_open_unit(name: &'static str, x: f64) -> Result<f64> {
    if x > 0.0 && x < 1.0 {
        Ok(x)
    } else {
        Err(Error::Domain {
            name,
            value: x,
            domain: "(0, 1)",
        })
    }
}

fn validate_rates(beta: f64, gamma: f64) -> Result<()> {
    require_nonnegative("beta", beta)?;
    require_positive("gamma", gamma)?;
    Ok(())
}

/// Deterministic reproduction number `β/γ`.
pub fn r0_deterministic(beta: f64, gamma: f64) -> Result<f64> {
    validate_rates(beta, gamma)?;
    Ok(beta / gamma)
}

/// Infected fraction at time `t` starting from `x`.
pub fn flow(t: f64, x: f64, beta: f64, gamma: f64) -> Result<f64> {
    require_nonnegative("t", t)?;
    require_open_unit("x", x)?;
    require_finite("beta", beta)?;
    require_finite("gamma", gamma)?;
    Ok(flow_unchecked(t, x, beta, gamma))
}

/// [`flow`] without argument validation.
///
/// Used on finite-difference stencils, where `x` and `β` may sit just
/// outside their nominal ranges.
#[inline]
pub fn flow_unchecked(t: f64, x: f64, beta: f64, gamma: f64) -> f64 {
    if t == 0.0 {
        return x;
    }
    let d = beta - gamma;
    let td = t * d;
    if td.abs() < DEGENERACY_THRESHOLD * (1.0 + beta.abs() * t) {
        return x / (1.0 + x * beta * t);
    }
    if td > LARGE_EXPONENT {
        // x / (e^{-td} + xβ(1 - e^{-td})/d)
        let em = (-td).exp();
        let growth = -(-td).exp_m1() / d;
        return x / (em + x * beta * growth);
    }
    let growth = td.exp_m1() / d;
    x * td.exp() / (1.0 + x * beta * growth)
}

/// Long-run limit of the flow: `0` when `β/γ ≤ 1`, otherwise `(β-γ)/β`.
pub fn deterministic_limit(beta: f64, gamma: f64) -> Result<f64> {
    validate_rates(beta, gamma)?;
    Ok(if beta <= gamma {
        0.0
    } else {
        (beta - gamma) / beta
    })
}

/// Right-hand side `x(1-x)β_eff - γx` of the SIS equation.
#[inline]
pub fn ode_rhs(x: f64, beta_eff: f64, gamma: f64) -> f64 {
    x * (1.0 - x) * beta_eff - gamma * x
}

/// Evaluates the representation of the flow in terms of the cumulative
/// transmission `B(t) = ∫₀ᵗ β ds`:
///
/// ```text
/// I_t = x e^{B(t)-γt} / (1 + x(e^{B(t)-γt} - 1 + ∫₀ᵗ γ e^{B(s)-γs} ds))
/// ```
///
/// The inner integral uses `quad` and is checked against a refined rule.
pub fn integral_form(
    t: f64,
    x: f64,
    gamma: f64,
    integrated_beta: impl Fn(f64) -> f64,
    quad: &CompositeGaussLegendre,
) -> Result<f64> {
    require_nonnegative("t", t)?;
    require_open_unit("x", x)?;
    require_positive("gamma", gamma)?;
    if t == 0.0 {
        return Ok(x);
    }
    let b0 = integrated_beta(0.0);
    if b0 != 0.0 {
        return Err(Error::InvalidParameter {
            name: "integrated_beta(0)",
            value: b0,
            reason: "cumulative transmission must vanish at t = 0",
        });
    }
    let inner = quad.integrate_checked(0.0, t, 1e-12, |s| {
        gamma * (integrated_beta(s) - gamma * s).exp()
    })?;
    let e = (integrated_beta(t) - gamma * t).exp();
    let value = x * e / (1.0 + x * (e - 1.0 + inner));
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Numeric(format!(
            "integral representation overflowed at t = {t}"
        )))
    }
}
