//! Perturbation processes for the transmission rate.
//!
//! A perturbation is a one-dimensional diffusion `dY = a(Y)dt + b(Y)dB`. For
//! the correction engine it is written with a scale `c`:
//! `a(y) = c·ã(y)` and `b(y) = √c·b̃(y)`. [`CoefficientPair`] stores `ã`,
//! `b̃` and `c`; the named models convert into it with
//! [`NaturalModel::coefficient_pair`].

use std::fmt;
use std::sync::Arc;

use statrs::function::gamma::ln_gamma;

use crate::error::{require_finite, require_positive, Error, Result};

type CoefficientFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Whether the ergodicity assumption is known to hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ergodicity {
    /// Checked against the model's parameter inequality.
    Verified(bool),
    /// Generic coefficients; nobody checked.
    Unverified,
}

/// Scaled drift/diffusion coefficients `(ã, b̃)` and the scale `c`.
#[derive(Clone)]
pub struct CoefficientPair {
    drift_tilde: CoefficientFn,
    diffusion_tilde: CoefficientFn,
    scale_c: f64,
    ergodicity: Ergodicity,
    degenerate: bool,
    label: String,
}

impl fmt::Debug for CoefficientPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientPair")
            .field("label", &self.label)
            .field("scale_c", &self.scale_c)
            .field("ergodicity", &self.ergodicity)
            .field("degenerate", &self.degenerate)
            .finish()
    }
}

impl CoefficientPair {
    /// Wraps arbitrary scaled coefficients. Ergodicity is left unverified.
    pub fn from_fns(
        label: impl Into<String>,
        drift_tilde: impl Fn(f64) -> f64 + Send + Sync + 'static,
        diffusion_tilde: impl Fn(f64) -> f64 + Send + Sync + 'static,
        scale_c: f64,
    ) -> Result<Self> {
        validate_scale(scale_c)?;
        Ok(Self {
            drift_tilde: Arc::new(drift_tilde),
            diffusion_tilde: Arc::new(diffusion_tilde),
            scale_c,
            ergodicity: Ergodicity::Unverified,
            degenerate: scale_c == 0.0,
            label: label.into(),
        })
    }

    /// Polynomial family: `ã(y) = Σ dᵢ yⁱ` and `b̃(y) = √max(Σ vᵢ yⁱ, 0)`.
    ///
    /// Both named models are members: CIR has `d = [ab, -a]/c`,
    /// `v = [0, σ²]/c`; the logistic model has `d = [0, a, -b]/c`,
    /// `v = [0, 0, σ²]/c`.
    pub fn polynomial(drift: Vec<f64>, diffusion_sq: Vec<f64>, scale_c: f64) -> Result<Self> {
        for &k in drift.iter().chain(&diffusion_sq) {
            require_finite("polynomial coefficient", k)?;
        }
        let label = format!("generic(drift={drift:?}, diffusion_sq={diffusion_sq:?})");
        Self::from_fns(
            label,
            move |y| horner(&drift, y),
            move |y| horner(&diffusion_sq, y).max(0.0).sqrt(),
            scale_c,
        )
    }

    /// Same `ã`, `b̃` with a different scale, i.e. effective coefficients
    /// `c'·ã` and `√c'·b̃`.
    pub fn with_scale(&self, scale_c: f64) -> Result<Self> {
        validate_scale(scale_c)?;
        let mut out = self.clone();
        out.scale_c = scale_c;
        out.degenerate = scale_c == 0.0;
        Ok(out)
    }

    pub fn with_ergodicity(mut self, ergodicity: Ergodicity) -> Self {
        self.ergodicity = ergodicity;
        self
    }

    #[inline]
    pub fn drift_tilde(&self, y: f64) -> f64 {
        (self.drift_tilde)(y)
    }

    #[inline]
    pub fn diffusion_tilde(&self, y: f64) -> f64 {
        (self.diffusion_tilde)(y)
    }

    /// `a(y) = c·ã(y)`.
    #[inline]
    pub fn drift(&self, y: f64) -> f64 {
        self.scale_c * self.drift_tilde(y)
    }

    /// `b(y) = √c·b̃(y)`.
    #[inline]
    pub fn diffusion(&self, y: f64) -> f64 {
        self.scale_c.sqrt() * self.diffusion_tilde(y)
    }

    pub fn scale_c(&self) -> f64 {
        self.scale_c
    }

    pub fn ergodicity(&self) -> Ergodicity {
        self.ergodicity
    }

    /// `c = 0`: the perturbation is switched off.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

fn horner(coeffs: &[f64], y: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &k| acc * y + k)
}

fn validate_scale(c: f64) -> Result<()> {
    require_finite("scale_c", c)?;
    if (0.0..1.0).contains(&c) {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "scale_c",
            value: c,
            domain: "[0, 1)",
        })
    }
}

/// `dY = a(b - Y)dt + σ√Y dB`, `Y₀ = y0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirParams {
    pub a: f64,
    pub b: f64,
    pub sigma: f64,
    pub y0: f64,
}

impl CirParams {
    pub fn new(a: f64, b: f64, sigma: f64, y0: f64) -> Result<Self> {
        let p = Self { a, b, sigma, y0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("cir.a", self.a)?;
        require_positive("cir.b", self.b)?;
        require_positive("cir.sigma", self.sigma)?;
        require_positive("cir.y0", self.y0)?;
        Ok(())
    }

    /// Feller ratio `2ab/σ²`; the process stays positive and is ergodic
    /// when it exceeds one.
    pub fn feller_ratio(&self) -> f64 {
        2.0 * self.a * self.b / (self.sigma * self.sigma)
    }

    /// Same effective process with mean-reversion and volatility rescaled
    /// as if `ã`, `b̃` were held fixed while `c` moves from `from_c` to `to_c`.
    pub fn rescaled(&self, from_c: f64, to_c: f64) -> Self {
        let k = to_c / from_c;
        Self {
            a: self.a * k,
            sigma: self.sigma * k.sqrt(),
            ..*self
        }
    }
}

/// `dY = Y(a - bY)dt + σY dB`, `Y₀ = y0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticParams {
    pub a: f64,
    pub b: f64,
    pub sigma: f64,
    pub y0: f64,
}

impl LogisticParams {
    pub fn new(a: f64, b: f64, sigma: f64, y0: f64) -> Result<Self> {
        let p = Self { a, b, sigma, y0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("logistic.a", self.a)?;
        require_positive("logistic.b", self.b)?;
        require_positive("logistic.sigma", self.sigma)?;
        require_positive("logistic.y0", self.y0)?;
        Ok(())
    }

    /// `2a/σ²`; ergodic when it exceeds one.
    pub fn ergodicity_ratio(&self) -> f64 {
        2.0 * self.a / (self.sigma * self.sigma)
    }
}

/// Additive white-noise perturbation `βdt → βdt + σdB` with `σ = σ̃√c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrayParams {
    pub beta: f64,
    pub gamma: f64,
    pub sigma_tilde: f64,
    pub scale_c: f64,
}

impl GrayParams {
    pub fn new(beta: f64, gamma: f64, sigma_tilde: f64, scale_c: f64) -> Result<Self> {
        let p = Self {
            beta,
            gamma,
            sigma_tilde,
            scale_c,
        };
        p.validate()?;
        Ok(p)
    }

    /// Builds the scaled form from the physical noise amplitude `σ`.
    /// With `c = 0` only `σ = 0` is representable.
    pub fn from_sigma(beta: f64, gamma: f64, sigma: f64, scale_c: f64) -> Result<Self> {
        validate_scale(scale_c)?;
        let sigma_tilde = if scale_c == 0.0 {
            if sigma != 0.0 {
                return Err(Error::InconsistentParameters(format!(
                    "gray sigma = {sigma} cannot be produced with scale_c = 0"
                )));
            }
            0.0
        } else {
            sigma / scale_c.sqrt()
        };
        Self::new(beta, gamma, sigma_tilde, scale_c)
    }

    pub fn validate(&self) -> Result<()> {
        crate::error::require_nonnegative("gray.beta", self.beta)?;
        require_positive("gray.gamma", self.gamma)?;
        crate::error::require_nonnegative("gray.sigma_tilde", self.sigma_tilde)?;
        validate_scale(self.scale_c)
    }

    /// Physical amplitude `σ = σ̃√c`.
    pub fn sigma(&self) -> f64 {
        self.sigma_tilde * self.scale_c.sqrt()
    }
}

/// A named perturbation with a known gamma stationary law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NaturalModel {
    Cir(CirParams),
    Logistic(LogisticParams),
}

impl NaturalModel {
    pub fn y0(&self) -> f64 {
        match self {
            Self::Cir(p) => p.y0,
            Self::Logistic(p) => p.y0,
        }
    }

    pub fn sigma(&self) -> f64 {
        match self {
            Self::Cir(p) => p.sigma,
            Self::Logistic(p) => p.sigma,
        }
    }

    pub fn is_ergodic(&self) -> bool {
        self.ergodicity_check().is_ok()
    }

    fn ergodicity_check(&self) -> Result<()> {
        match self {
            Self::Cir(p) => {
                p.validate()?;
                let r = p.feller_ratio();
                if r > 1.0 {
                    Ok(())
                } else {
                    Err(Error::NotErgodic {
                        condition: "2ab/sigma^2 > 1",
                        detail: format!("2ab/sigma^2 = {r}"),
                    })
                }
            }
            Self::Logistic(p) => {
                p.validate()?;
                let lhs = 2.0 * p.a;
                let rhs = p.sigma * p.sigma;
                if lhs > rhs {
                    Ok(())
                } else {
                    Err(Error::NotErgodic {
                        condition: "2a > sigma^2",
                        detail: format!("2a = {lhs}, sigma^2 = {rhs}"),
                    })
                }
            }
        }
    }

    /// Gamma stationary law (shape λ, rate ω).
    pub fn stationary_law(&self) -> Result<StationaryLaw> {
        self.ergodicity_check()?;
        let (shape, rate) = match self {
            Self::Cir(p) => {
                let s2 = p.sigma * p.sigma;
                (2.0 * p.a * p.b / s2, 2.0 * p.a / s2)
            }
            Self::Logistic(p) => {
                let s2 = p.sigma * p.sigma;
                (2.0 * p.a / s2 - 1.0, 2.0 * p.b / s2)
            }
        };
        StationaryLaw::new(shape, rate)
    }

    /// `E[Y∞]`: `b` for CIR, `(2a - σ²)/(2b)` for the logistic model.
    pub fn stationary_mean(&self) -> Result<f64> {
        self.ergodicity_check()?;
        Ok(match self {
            Self::Cir(p) => p.b,
            Self::Logistic(p) => (2.0 * p.a - p.sigma * p.sigma) / (2.0 * p.b),
        })
    }

    pub fn stationary_pdf(&self, x: f64) -> Result<f64> {
        require_positive("x", x)?;
        Ok(self.stationary_law()?.pdf(x))
    }

    /// Effective drift `a(y)` of the named SDE.
    pub fn drift(&self, y: f64) -> f64 {
        match self {
            Self::Cir(p) => p.a * (p.b - y),
            Self::Logistic(p) => y * (p.a - p.b * y),
        }
    }

    /// Effective diffusion `b(y)` of the named SDE; `√y` is truncated at 0.
    pub fn diffusion(&self, y: f64) -> f64 {
        match self {
            Self::Cir(p) => p.sigma * y.max(0.0).sqrt(),
            Self::Logistic(p) => p.sigma * y,
        }
    }

    /// Scaled coefficients with `c·ã = a(y)` and `√c·b̃ = b(y)`.
    ///
    /// `c = 0` yields a degenerate pair whose coefficients vanish.
    pub fn coefficient_pair(&self, scale_c: f64) -> Result<CoefficientPair> {
        validate_scale(scale_c)?;
        let ergodicity = Ergodicity::Verified(self.is_ergodic());
        let model = *self;
        let label = match self {
            Self::Cir(_) => "cir",
            Self::Logistic(_) => "logistic",
        };
        let pair = if scale_c == 0.0 {
            CoefficientPair::from_fns(label, |_| 0.0, |_| 0.0, 0.0)?
        } else {
            let sqrt_c = scale_c.sqrt();
            CoefficientPair::from_fns(
                label,
                move |y| model.drift(y) / scale_c,
                move |y| model.diffusion(y) / sqrt_c,
                scale_c,
            )?
        };
        Ok(pair.with_ergodicity(ergodicity))
    }
}

/// `E[Y_t] = y e^{-at} + b(1 - e^{-at})` for the CIR process.
pub fn cir_mean(t: f64, params: &CirParams) -> f64 {
    // written around b so that y = b gives b exactly
    params.b + (params.y0 - params.b) * (-params.a * t).exp()
}

/// Gamma law `ω^λ x^{λ-1} e^{-ωx} / Γ(λ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryLaw {
    pub shape: f64,
    pub rate: f64,
    pub mean: f64,
}

impl StationaryLaw {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        require_positive("shape", shape)?;
        require_positive("rate", rate)?;
        Ok(Self {
            shape,
            rate,
            mean: shape / rate,
        })
    }

    pub fn variance(&self) -> f64 {
        self.shape / (self.rate * self.rate)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let ln = self.shape * self.rate.ln() + (self.shape - 1.0) * x.ln()
            - self.rate * x
            - ln_gamma(self.shape);
        ln.exp()
    }
}

/// Outcome of probing the non-negativity conditions on a coefficient pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    /// `a(y) ≥ 0` at every probe point.
    pub drift_nonnegative: bool,
    /// `b(y) ≥ 0` at every probe point.
    pub diffusion_nonnegative: bool,
    /// `a(0) ≥ 0`.
    pub drift_at_zero_nonnegative: bool,
    /// `|b(0)| ≤ 1e-12`.
    pub diffusion_vanishes_at_zero: bool,
    pub ergodicity: Ergodicity,
    /// Probe points where `a(y) < 0`.
    pub negative_drift_points: Vec<f64>,
}

impl AssumptionReport {
    /// True when the perturbation is guaranteed non-negative and ergodic:
    /// `b ≥ 0` on the grid, `a(0) ≥ 0`, `b(0) = 0` and ergodicity not
    /// refuted.
    ///
    /// Negative drift on the interior is reported but does not fail the
    /// check: any mean-reverting process has `a(y) < 0` above its mean.
    pub fn passes(&self) -> bool {
        self.diffusion_nonnegative
            && self.drift_at_zero_nonnegative
            && self.diffusion_vanishes_at_zero
            && self.ergodicity != Ergodicity::Verified(false)
    }

    /// Strict reading where the drift must be non-negative on the whole grid.
    pub fn passes_strict(&self) -> bool {
        self.passes() && self.drift_nonnegative
    }
}

/// Absolute tolerance for `b(0) = 0`.
pub const ZERO_DIFFUSION_TOL: f64 = 1e-12;

/// Default probe grid: 512 uniform interior points of `(0, 1)`.
pub fn default_probe_grid() -> Vec<f64> {
    let n = 512;
    (1..=n).map(|i| i as f64 / (n + 1) as f64).collect()
}

/// Probes the effective coefficients `a = c·ã`, `b = √c·b̃` on `probe_grid`.
/// For a degenerate pair (`c = 0`) the scaled coefficients are probed instead.
pub fn check_natural_assumptions(
    coeffs: &CoefficientPair,
    probe_grid: &[f64],
) -> Result<AssumptionReport> {
    if probe_grid.is_empty() {
        return Err(Error::InvalidParameter {
            name: "probe_grid",
            value: 0.0,
            reason: "must contain at least one point",
        });
    }
    if let Some(&bad) = probe_grid.iter().find(|&&y| !(y > 0.0 && y < 1.0)) {
        return Err(Error::Domain {
            name: "probe point",
            value: bad,
            domain: "(0, 1)",
        });
    }
    type Coef<'a> = Box<dyn Fn(f64) -> f64 + 'a>;
    let (drift, diffusion): (Coef, Coef) = if coeffs.is_degenerate() {
        (
            Box::new(|y| coeffs.drift_tilde(y)),
            Box::new(|y| coeffs.diffusion_tilde(y)),
        )
    } else {
        (
            Box::new(|y| coeffs.drift(y)),
            Box::new(|y| coeffs.diffusion(y)),
        )
    };
    let negative_drift_points: Vec<f64> = probe_grid
        .iter()
        .copied()
        .filter(|&y| drift(y) < 0.0)
        .collect();
    Ok(AssumptionReport {
        drift_nonnegative: negative_drift_points.is_empty(),
        diffusion_nonnegative: probe_grid.iter().all(|&y| diffusion(y) >= 0.0),
        drift_at_zero_nonnegative: drift(0.0) >= 0.0,
        diffusion_vanishes_at_zero: diffusion(0.0).abs() <= ZERO_DIFFUSION_TOL,
        ergodicity: coeffs.ergodicity(),
        negative_drift_points,
    })
}
