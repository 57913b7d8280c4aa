//! Long-run classification: extinction, persistence and the level the
//! infected fraction keeps returning to.

use std::fmt;

use serde_json::{json, Map, Value};

use crate::error::{require_nonnegative, require_positive, Error, Result};
use crate::simulate::SamplePath;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Extinct,
    Persistent,
    Inconclusive,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Extinct => "Extinct",
            Self::Persistent => "Persistent",
            Self::Inconclusive => "Inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub regime: Regime,
    /// Reproduction number the regime was decided from.
    pub r0: f64,
    /// Persistence level (`I*` or `ξ`); present only when persistent.
    pub level: Option<f64>,
    /// Every inequality that was evaluated, by name.
    pub conditions: Vec<(String, bool)>,
}

impl Verdict {
    /// One-line JSON record: regime, r0, level and each named condition.
    pub fn to_record(&self) -> String {
        let mut conditions = Map::new();
        for (name, ok) in &self.conditions {
            conditions.insert(name.clone(), Value::Bool(*ok));
        }
        json!({
            "regime": self.regime.to_string(),
            "r0": self.r0,
            "level": self.level,
            "conditions": conditions,
        })
        .to_string()
    }

    pub fn condition(&self, name: &str) -> Option<bool> {
        self.conditions
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }
}

/// Classifies the naturally perturbed model from the stationary mean
/// `E[Y∞]` of the perturbation.
///
/// `R₀ = E[Y∞]/γ`. Below one the infection dies out, above one it persists
/// around `I* = 1 - γ/E[Y∞]`, the inverse of `f(x) = -1/(1-x)` at `-R₀`.
/// Both statements are strict, so `R₀ = 1` is inconclusive.
pub fn classify_natural(stationary_mean: f64, gamma: f64) -> Result<Verdict> {
    require_positive("gamma", gamma)?;
    require_nonnegative("stationary_mean", stationary_mean)?;
    let r0 = stationary_mean / gamma;
    let below = stationary_mean < gamma;
    let above = stationary_mean > gamma;
    let conditions = vec![("R0<1".to_string(), below), ("R0>1".to_string(), above)];
    let (regime, level) = if below {
        (Regime::Extinct, None)
    } else if above {
        (
            Regime::Persistent,
            Some((stationary_mean - gamma) / stationary_mean),
        )
    } else {
        (Regime::Inconclusive, None)
    };
    Ok(Verdict {
        regime,
        r0,
        level,
        conditions,
    })
}

/// Level `ξ = (√(β² - 2σ²γ) - β + σ²)/σ²` of the additive-noise model,
/// evaluated as `1 - 2γ/(√(β² - 2σ²γ) + β)` so that `σ → 0` gives
/// `(β - γ)/β` without cancellation.
pub fn gray_level(beta: f64, gamma: f64, sigma: f64) -> Result<f64> {
    let disc = beta * beta - 2.0 * sigma * sigma * gamma;
    if disc < 0.0 {
        return Err(Error::InconsistentParameters(format!(
            "beta^2 - 2 sigma^2 gamma = {disc} < 0, persistence level undefined"
        )));
    }
    let root = disc.sqrt();
    if root + beta == 0.0 {
        return Err(Error::InconsistentParameters(
            "persistence level undefined for beta = sigma = 0".into(),
        ));
    }
    Ok(1.0 - 2.0 * gamma / (root + beta))
}

/// Classifies the additive-noise model `βdt → βdt + σdB`.
///
/// `R₀ = β/γ - σ²/(2γ)`. Extinct when `R₀ < 1` and `σ² < β`, or when
/// `σ² > max(β, β/γ)`; persistent around `ξ` when `R₀ > 1`; otherwise
/// inconclusive.
pub fn classify_gray(beta: f64, gamma: f64, sigma: f64) -> Result<Verdict> {
    require_positive("beta", beta)?;
    require_positive("gamma", gamma)?;
    require_nonnegative("sigma", sigma)?;
    let s2 = sigma * sigma;
    let r0 = beta / gamma - s2 / (2.0 * gamma);
    let r0_below = r0 < 1.0;
    let small_noise = s2 < beta;
    let large_noise = s2 > beta.max(beta / gamma);
    let r0_above = r0 > 1.0;
    let conditions = vec![
        ("R0<1".to_string(), r0_below),
        ("sigma^2<beta".to_string(), small_noise),
        ("sigma^2>max(beta,beta/gamma)".to_string(), large_noise),
        ("R0>1".to_string(), r0_above),
    ];
    let (regime, level) = if (r0_below && small_noise) || large_noise {
        (Regime::Extinct, None)
    } else if r0_above {
        (Regime::Persistent, Some(gray_level(beta, gamma, sigma)?))
    } else {
        (Regime::Inconclusive, None)
    };
    Ok(Verdict {
        regime,
        r0,
        level,
        conditions,
    })
}

/// Trapezoidal time average `(1/T)∫₀ᵀ Y ds` of a path.
pub fn ergodic_average(path: &SamplePath) -> Result<f64> {
    let v = &path.values;
    if v.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "path length",
            value: v.len() as f64,
            reason: "need at least two nodes",
        });
    }
    let inner: f64 = v[1..v.len() - 1].iter().sum();
    let n = (v.len() - 1) as f64;
    Ok((0.5 * (v[0] + v[v.len() - 1]) + inner) / n)
}

/// Standard error of the time average by non-overlapping batch means.
pub fn batch_means_stderr(path: &SamplePath, n_batches: usize) -> Result<f64> {
    let steps = path.values.len().saturating_sub(1);
    if n_batches < 2 || steps < n_batches {
        return Err(Error::InvalidParameter {
            name: "n_batches",
            value: n_batches as f64,
            reason: "need at least two batches and one step per batch",
        });
    }
    let per = steps / n_batches;
    let means: Vec<f64> = (0..n_batches)
        .map(|b| {
            let seg = &path.values[b * per..=(b + 1) * per];
            let inner: f64 = seg[1..seg.len() - 1].iter().sum();
            (0.5 * (seg[0] + seg[seg.len() - 1]) + inner) / per as f64
        })
        .collect();
    let m = means.iter().sum::<f64>() / n_batches as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n_batches - 1) as f64;
    Ok((var / n_batches as f64).sqrt())
}

/// Number of times the path crosses `level` after `burn_in_fraction` of its
/// horizon. Touching the level counts as a crossing.
pub fn crossings_after(path: &SamplePath, level: f64, burn_in_fraction: f64) -> usize {
    let start = path
        .grid
        .nearest_index(burn_in_fraction * path.grid.t_end())
        .min(path.values.len() - 1);
    path.values[start..]
        .windows(2)
        .filter(|w| (w[0] - level) * (w[1] - level) <= 0.0)
        .count()
}

/// Fraction of the horizon treated as burn-in by [`oscillates_about`].
pub const PERSISTENCE_BURN_IN: f64 = 0.25;

/// True when the path crosses `level` at least once after the burn-in.
pub fn oscillates_about(path: &SamplePath, level: f64) -> bool {
    crossings_after(path, level, PERSISTENCE_BURN_IN) > 0
}
