//! Path simulation and seeded Monte Carlo ensembles.
//!
//! Every path is driven by its own ChaCha stream. Path `i` of an ensemble
//! uses [`path_seed`]`(base_seed, i)`, and per-node statistics are
//! accumulated in path-index order, so results do not depend on how many
//! worker threads ran the paths.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::diffusions::{CirParams, CoefficientPair, GrayParams, LogisticParams, NaturalModel};
use crate::error::{require_positive, Error, Result};
use crate::sis::{ode_rhs, SisParams};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "SIS_PERTURB_THREADS";

/// Values below zero by at most this much are read as zero in SIS outputs.
pub const RANGE_TOLERANCE: f64 = 1e-12;

/// Maximum number of local step halvings in the additive-noise SIS scheme.
pub const MAX_HALVINGS: u32 = 20;

/// Uniform grid on `[0, t_end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_end: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, n_steps: usize) -> Result<Self> {
        require_positive("t_end", t_end)?;
        if n_steps == 0 {
            return Err(Error::InvalidParameter {
                name: "n_steps",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        Ok(Self { t_end, n_steps })
    }

    /// Grid with spacing as close to `dt` as an integer step count allows.
    pub fn with_dt(t_end: f64, dt: f64) -> Result<Self> {
        require_positive("dt", dt)?;
        let n = (t_end / dt).round().max(1.0) as usize;
        Self::new(t_end, n)
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.n_steps as f64
    }

    /// Number of nodes including `t = 0`.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t_end
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.time(k))
    }

    /// Node closest to time `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        ((t / self.dt()).round().max(0.0) as usize).min(self.n_steps)
    }

    /// The same horizon with half the spacing.
    pub fn refined(&self) -> Self {
        Self {
            t_end: self.t_end,
            n_steps: self.n_steps * 2,
        }
    }
}

/// One simulated trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub seed: u64,
}

impl SamplePath {
    pub fn terminal(&self) -> f64 {
        *self
            .values
            .last()
            .expect("paths always hold the t = 0 node")
    }

    /// Iterator over `(t, value)` pairs.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid.times().zip(self.values.iter().copied())
    }
}

/// Seed for path `index` of an ensemble: a splitmix64 finaliser applied to
/// `base_seed + (index + 1)·φ64`.
pub fn path_seed(base_seed: u64, index: u64) -> u64 {
    let mut z = base_seed.wrapping_add((index.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Brownian increments `ΔB_k ~ N(0, dt)` for every step of `grid`.
pub fn brownian_increments(grid: &TimeGrid, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = grid.dt().sqrt();
    (0..grid.n_steps())
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Sums consecutive pairs: increments of the same Brownian path on a grid
/// with twice the spacing.
pub fn coarsen_increments(fine: &[f64]) -> Vec<f64> {
    fine.chunks_exact(2).map(|p| p[0] + p[1]).collect()
}

fn check_increments(grid: &TimeGrid, dw: &[f64]) -> Result<()> {
    if dw.len() != grid.n_steps() {
        return Err(Error::InconsistentParameters(format!(
            "{} increments supplied for a grid of {} steps",
            dw.len(),
            grid.n_steps()
        )));
    }
    Ok(())
}

/// Full-truncation Euler path of the CIR process.
pub fn simulate_cir(params: &CirParams, grid: &TimeGrid, seed: u64) -> Result<SamplePath> {
    let dw = brownian_increments(grid, seed);
    let mut path = cir_path_from_increments(params, grid, &dw)?;
    path.seed = seed;
    Ok(path)
}

/// Full-truncation Euler on given increments:
/// `Y_{k+1} = Y_k + a(b - Y_k⁺)dt + σ√(Y_k⁺)ΔB_k`, reported as `max(Y_k, 0)`.
pub fn cir_path_from_increments(
    params: &CirParams,
    grid: &TimeGrid,
    dw: &[f64],
) -> Result<SamplePath> {
    params.validate()?;
    check_increments(grid, dw)?;
    let dt = grid.dt();
    if params.a * dt >= 1.0 {
        return Err(Error::InvalidParameter {
            name: "dt",
            value: dt,
            reason: "mean-reversion rate times dt must stay below 1",
        });
    }
    if params.feller_ratio() <= 1.0 {
        log::warn!(
            "CIR Feller ratio {} <= 1; the process can touch zero",
            params.feller_ratio()
        );
    }
    let mut values = Vec::with_capacity(grid.len());
    let mut y = params.y0;
    values.push(y.max(0.0));
    for (k, dwk) in dw.iter().enumerate() {
        let yp = y.max(0.0);
        y += params.a * (params.b - yp) * dt + params.sigma * yp.sqrt() * dwk;
        if !y.is_finite() {
            return Err(Error::IntegratorFailure {
                step: k + 1,
                reason: format!("CIR state became {y}"),
            });
        }
        values.push(y.max(0.0));
    }
    Ok(SamplePath {
        grid: *grid,
        values,
        seed: 0,
    })
}

/// Stochastic logistic path integrated in log space, so every value is
/// positive: `d ln Y = (a - bY - σ²/2)dt + σ dB`.
pub fn simulate_logistic(
    params: &LogisticParams,
    grid: &TimeGrid,
    seed: u64,
) -> Result<SamplePath> {
    params.validate()?;
    if 2.0 * params.a <= params.sigma * params.sigma {
        log::warn!(
            "logistic perturbation with 2a = {} <= sigma^2 = {} is not ergodic",
            2.0 * params.a,
            params.sigma * params.sigma
        );
    }
    let dw = brownian_increments(grid, seed);
    let dt = grid.dt();
    let drift_const = params.a - 0.5 * params.sigma * params.sigma;
    let mut values = Vec::with_capacity(grid.len());
    let mut ln_y = params.y0.ln();
    values.push(params.y0);
    for (k, dwk) in dw.iter().enumerate() {
        let y = ln_y.exp();
        ln_y += (drift_const - params.b * y) * dt + params.sigma * dwk;
        let next = ln_y.exp();
        if !next.is_finite() || next <= 0.0 {
            return Err(Error::IntegratorFailure {
                step: k + 1,
                reason: format!("logistic state became {next}"),
            });
        }
        values.push(next);
    }
    Ok(SamplePath {
        grid: *grid,
        values,
        seed,
    })
}

/// Full-truncation Euler for an arbitrary coefficient pair, using the
/// effective coefficients `c·ã` and `√c·b̃`.
pub fn simulate_generic(
    coeffs: &CoefficientPair,
    y0: f64,
    grid: &TimeGrid,
    seed: u64,
) -> Result<SamplePath> {
    crate::error::require_nonnegative("y0", y0)?;
    let dw = brownian_increments(grid, seed);
    let dt = grid.dt();
    let mut values = Vec::with_capacity(grid.len());
    let mut y = y0;
    values.push(y);
    for (k, dwk) in dw.iter().enumerate() {
        let yp = y.max(0.0);
        y += coeffs.drift(yp) * dt + coeffs.diffusion(yp) * dwk;
        if !y.is_finite() {
            return Err(Error::IntegratorFailure {
                step: k + 1,
                reason: format!("perturbation state became {y}"),
            });
        }
        values.push(y.max(0.0));
    }
    Ok(SamplePath {
        grid: *grid,
        values,
        seed,
    })
}

/// Simulates whichever natural model is given.
pub fn simulate_natural(model: &NaturalModel, grid: &TimeGrid, seed: u64) -> Result<SamplePath> {
    match model {
        NaturalModel::Cir(p) => simulate_cir(p, grid, seed),
        NaturalModel::Logistic(p) => simulate_logistic(p, grid, seed),
    }
}

/// Integrates `dI/dt = I(1-I)Y_t - γI` along a perturbation path, holding
/// `Y` at its left-node value over each step and taking one classical
/// Runge–Kutta step.
pub fn simulate_perturbed_sis(sis: &SisParams, y_path: &SamplePath) -> Result<SamplePath> {
    sis.validate()?;
    let grid = y_path.grid;
    if y_path.values.len() != grid.len() {
        return Err(Error::InconsistentParameters(format!(
            "perturbation path has {} values for {} grid nodes",
            y_path.values.len(),
            grid.len()
        )));
    }
    let dt = grid.dt();
    let gamma = sis.gamma;
    let mut values = Vec::with_capacity(grid.len());
    let mut x = sis.x0;
    values.push(x);
    for (k, &y) in y_path.values[..grid.n_steps()].iter().enumerate() {
        if y.is_nan() || y < 0.0 {
            return Err(Error::Domain {
                name: "perturbation value",
                value: y,
                domain: "[0, inf)",
            });
        }
        let f = |v: f64| ode_rhs(v, y, gamma);
        let k1 = f(x);
        let k2 = f(x + 0.5 * dt * k1);
        let k3 = f(x + 0.5 * dt * k2);
        let k4 = f(x + dt * k3);
        x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (-RANGE_TOLERANCE..0.0).contains(&x) {
            x = 0.0;
        }
        if !(0.0..1.0).contains(&x) {
            return Err(Error::IntegratorFailure {
                step: k + 1,
                reason: format!("infected fraction left [0, 1): {x}"),
            });
        }
        values.push(x);
    }
    Ok(SamplePath {
        grid,
        values,
        seed: y_path.seed,
    })
}

/// Euler–Maruyama for `dI = (βI(1-I) - γI)dt + σI(1-I)dB`.
///
/// A step that would leave `[0, 1)` is split in two halves, the midpoint of
/// the Brownian increment drawn from its bridge distribution, recursively
/// up to [`MAX_HALVINGS`] times.
pub fn simulate_gray_sis(
    params: &GrayParams,
    x0: f64,
    grid: &TimeGrid,
    seed: u64,
) -> Result<SamplePath> {
    params.validate()?;
    if !(0.0..1.0).contains(&x0) {
        return Err(Error::Domain {
            name: "x0",
            value: x0,
            domain: "[0, 1)",
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = grid.dt();
    let sd = dt.sqrt();
    let stepper = GrayStepper {
        beta: params.beta,
        gamma: params.gamma,
        sigma: params.sigma(),
    };
    let mut values = Vec::with_capacity(grid.len());
    let mut x = x0;
    values.push(x);
    for k in 0..grid.n_steps() {
        let dw = sd * rng.sample::<f64, _>(StandardNormal);
        x = stepper
            .advance(x, dt, dw, 0, &mut rng)
            .map_err(|reason| Error::IntegratorFailure {
                step: k + 1,
                reason,
            })?;
        values.push(x);
    }
    Ok(SamplePath {
        grid: *grid,
        values,
        seed,
    })
}

struct GrayStepper {
    beta: f64,
    gamma: f64,
    sigma: f64,
}

impl GrayStepper {
    fn advance(
        &self,
        x: f64,
        dt: f64,
        dw: f64,
        depth: u32,
        rng: &mut ChaCha8Rng,
    ) -> std::result::Result<f64, String> {
        let next = x + ode_rhs(x, self.beta, self.gamma) * dt + self.sigma * x * (1.0 - x) * dw;
        if (0.0..1.0).contains(&next) {
            return Ok(next);
        }
        if depth >= MAX_HALVINGS {
            return Err(format!(
                "state {next} outside [0, 1) after {MAX_HALVINGS} step halvings"
            ));
        }
        let half = 0.5 * dt;
        let dw1 = 0.5 * dw + 0.5 * dt.sqrt() * rng.sample::<f64, _>(StandardNormal);
        let dw2 = dw - dw1;
        let mid = self.advance(x, half, dw1, depth + 1, rng)?;
        self.advance(mid, half, dw2, depth + 1, rng)
    }
}

/// Reads [`THREADS_ENV`]; unset, empty, zero or unparsable means "no cap".
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Size and seeding of an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnsembleSpec {
    pub n_paths: usize,
    pub base_seed: u64,
    /// Worker cap; `None` uses rayon's global pool.
    pub threads: Option<usize>,
}

impl EnsembleSpec {
    /// Ensemble with the worker cap taken from the environment.
    pub fn new(n_paths: usize, base_seed: u64) -> Self {
        Self {
            n_paths,
            base_seed,
            threads: threads_from_env(),
        }
    }

    pub fn with_threads(mut self, threads: Option<usize>) -> Self {
        self.threads = threads;
        self
    }

    pub fn seed(&self, index: usize) -> u64 {
        path_seed(self.base_seed, index as u64)
    }
}

const CHUNK: usize = 64;

fn in_pool<R: Send>(threads: Option<usize>, op: impl FnOnce() -> R + Send) -> Result<R> {
    match threads {
        None => Ok(op()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Numeric(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(op))
        }
    }
}

/// Runs `f(index, seed)` for every path, in parallel, and hands results to
/// `sink` in index order. Stops at the first failing path.
pub fn for_each_path<T, F, S>(spec: &EnsembleSpec, f: F, mut sink: S) -> Result<()>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T> + Sync,
    S: FnMut(usize, T) + Send,
{
    if spec.n_paths == 0 {
        return Err(Error::InvalidParameter {
            name: "n_paths",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    in_pool(spec.threads, || {
        let mut start = 0;
        while start < spec.n_paths {
            let end = (start + CHUNK).min(spec.n_paths);
            let batch: Vec<Result<T>> = (start..end)
                .into_par_iter()
                .map(|i| f(i, spec.seed(i)))
                .collect();
            for (offset, item) in batch.into_iter().enumerate() {
                let index = start + offset;
                match item {
                    Ok(v) => sink(index, v),
                    Err(e) => {
                        return Err(Error::PathFailed {
                            index,
                            seed: spec.seed(index),
                            source: Box::new(e),
                        })
                    }
                }
            }
            start = end;
        }
        Ok(())
    })?
}

/// Collects `f(index, seed)` for every path in index order.
pub fn map_paths<T, F>(spec: &EnsembleSpec, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T> + Sync,
{
    let mut out = Vec::with_capacity(spec.n_paths);
    for_each_path(spec, f, |_, v| out.push(v))?;
    Ok(out)
}

/// Pointwise ensemble statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub grid: TimeGrid,
    pub mean: Vec<f64>,
    /// Unbiased; all zeros when only one path was run.
    pub variance: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_paths: usize,
    /// False when `n_paths < 2`.
    pub variance_defined: bool,
}

/// Welford accumulator over whole paths.
#[derive(Debug, Clone)]
pub struct PathAccumulator {
    grid: TimeGrid,
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl PathAccumulator {
    pub fn new(grid: TimeGrid) -> Self {
        Self {
            grid,
            count: 0,
            mean: vec![0.0; grid.len()],
            m2: vec![0.0; grid.len()],
        }
    }

    pub fn push(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.mean.len() {
            return Err(Error::InconsistentParameters(format!(
                "path of length {} pushed into an accumulator of length {}",
                values.len(),
                self.mean.len()
            )));
        }
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(values) {
            let delta = v - *m;
            *m += delta / n;
            *s += delta * (v - *m);
        }
        Ok(())
    }

    pub fn finish(self) -> EnsembleStats {
        let n = self.count;
        let defined = n >= 2;
        let variance: Vec<f64> = if defined {
            self.m2
                .iter()
                .map(|s| (s / (n - 1) as f64).max(0.0))
                .collect()
        } else {
            vec![0.0; self.m2.len()]
        };
        let stderr = variance.iter().map(|v| (v / n as f64).sqrt()).collect();
        EnsembleStats {
            grid: self.grid,
            mean: self.mean,
            variance,
            stderr,
            n_paths: n,
            variance_defined: defined,
        }
    }
}

/// Runs `spec.n_paths` paths from `factory(seed)` and reduces them pointwise.
pub fn ensemble<F>(spec: &EnsembleSpec, grid: &TimeGrid, factory: F) -> Result<EnsembleStats>
where
    F: Fn(u64) -> Result<SamplePath> + Sync,
{
    let mut acc = PathAccumulator::new(*grid);
    let mut push_err = None;
    for_each_path(
        spec,
        |_, seed| factory(seed),
        |_, path: SamplePath| {
            if push_err.is_none() {
                if let Err(e) = acc.push(&path.values) {
                    push_err = Some(e);
                }
            }
        },
    )?;
    if let Some(e) = push_err {
        return Err(e);
    }
    Ok(acc.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusions::cir_mean;
    use crate::sis::flow;

    #[test]
    fn grid_basics() {
        let g = TimeGrid::new(2.0, 4).unwrap();
        assert_eq!(g.dt(), 0.5);
        assert_eq!(g.len(), 5);
        assert_eq!(g.times().collect::<Vec<_>>(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(g.nearest_index(1.2), 2);
        assert!(TimeGrid::new(0.0, 3).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
        assert_eq!(TimeGrid::with_dt(400.0, 1e-2).unwrap().n_steps(), 40_000);
    }

    #[test]
    fn path_seeds_are_distinct_and_stable() {
        let seeds: std::collections::HashSet<u64> = (0..10_000).map(|i| path_seed(7, i)).collect();
        assert_eq!(seeds.len(), 10_000);
        assert_eq!(path_seed(7, 3), path_seed(7, 3));
        assert_ne!(path_seed(7, 3), path_seed(8, 3));
    }

    #[test]
    fn coarsened_increments_sum_pairs() {
        let g = TimeGrid::new(1.0, 8).unwrap();
        let fine = brownian_increments(&g, 11);
        let coarse = coarsen_increments(&fine);
        assert_eq!(coarse.len(), 4);
        assert_eq!(coarse[1], fine[2] + fine[3]);
    }

    #[test]
    fn zero_vol_cir_is_deterministic_mean() {
        // σ → 0 limit: use tiny σ so parameters stay valid, and zero increments
        let p = CirParams::new(0.5, 0.3, 1e-9, 0.9).unwrap();
        let g = TimeGrid::new(4.0, 4000).unwrap();
        let path = cir_path_from_increments(&p, &g, &vec![0.0; g.n_steps()]).unwrap();
        for (t, v) in path.points() {
            let exact = cir_mean(t, &p);
            assert!((v - exact).abs() <= 1e-3 * exact, "t {t}: {v} vs {exact}");
        }
    }

    #[test]
    fn cir_rejects_large_steps() {
        let p = CirParams::new(2.0, 0.3, 0.1, 0.3).unwrap();
        let g = TimeGrid::new(1.0, 1).unwrap();
        assert!(simulate_cir(&p, &g, 1).is_err());
    }

    #[test]
    fn cir_paths_are_nonnegative_even_without_feller() {
        let p = CirParams::new(0.5, 0.05, 1.0, 0.05).unwrap();
        let g = TimeGrid::new(20.0, 2000).unwrap();
        for seed in 0..20 {
            let path = simulate_cir(&p, &g, seed).unwrap();
            assert!(path.values.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn logistic_without_crowding_grows_exponentially() {
        let p = LogisticParams::new(0.3, 1e-12, 1e-12, 0.1).unwrap();
        let g = TimeGrid::new(2.0, 2000).unwrap();
        let path = simulate_logistic(&p, &g, 3).unwrap();
        for (t, v) in path.points() {
            let exact = 0.1 * (0.3 * t).exp();
            assert!((v - exact).abs() <= 1e-3 * exact);
        }
    }

    #[test]
    fn identical_seeds_give_identical_paths() {
        let p = CirParams::new(0.05, 0.5, 0.1, 0.5).unwrap();
        let g = TimeGrid::new(10.0, 1000).unwrap();
        assert_eq!(
            simulate_cir(&p, &g, 9).unwrap(),
            simulate_cir(&p, &g, 9).unwrap()
        );
        assert_ne!(
            simulate_cir(&p, &g, 9).unwrap(),
            simulate_cir(&p, &g, 10).unwrap()
        );
    }

    #[test]
    fn constant_perturbation_reproduces_flow() {
        let sis = SisParams::new(0.5, 0.4, 0.8).unwrap();
        let g = TimeGrid::new(30.0, 30_000).unwrap();
        let y = SamplePath {
            grid: g,
            values: vec![0.5; g.len()],
            seed: 0,
        };
        let path = simulate_perturbed_sis(&sis, &y).unwrap();
        for (t, v) in path.points() {
            assert!((v - flow(t, 0.8, 0.5, 0.4).unwrap()).abs() <= 1e-6);
        }
    }

    #[test]
    fn perturbed_sis_rejects_mismatched_or_negative_input() {
        let sis = SisParams::new(0.5, 0.4, 0.8).unwrap();
        let g = TimeGrid::new(1.0, 10).unwrap();
        let short = SamplePath {
            grid: g,
            values: vec![0.5; 3],
            seed: 0,
        };
        assert!(simulate_perturbed_sis(&sis, &short).is_err());
        let mut neg = SamplePath {
            grid: g,
            values: vec![0.5; g.len()],
            seed: 0,
        };
        neg.values[4] = -0.1;
        assert!(simulate_perturbed_sis(&sis, &neg).is_err());
    }

    #[test]
    fn gray_without_noise_follows_flow() {
        let p = GrayParams::new(0.5, 0.4, 0.0, 0.1).unwrap();
        let g = TimeGrid::new(20.0, 20_000).unwrap();
        let path = simulate_gray_sis(&p, 0.3, &g, 5).unwrap();
        for (t, v) in path.points() {
            assert!((v - flow(t, 0.3, 0.5, 0.4).unwrap()).abs() <= 1e-4);
        }
    }

    #[test]
    fn gray_absorbs_at_zero() {
        let p = GrayParams::from_sigma(0.5, 0.4, 0.3, 0.1).unwrap();
        let g = TimeGrid::new(5.0, 500).unwrap();
        let path = simulate_gray_sis(&p, 0.0, &g, 5).unwrap();
        assert!(path.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gray_stays_in_unit_interval_under_violent_noise() {
        let p = GrayParams::from_sigma(0.5, 0.4, 3.0, 0.5).unwrap();
        let g = TimeGrid::new(5.0, 50).unwrap();
        for seed in 0..50 {
            let path = simulate_gray_sis(&p, 0.5, &g, seed).unwrap();
            assert!(path.values.iter().all(|v| (0.0..1.0).contains(v)));
        }
    }

    #[test]
    fn single_path_ensemble_flags_variance() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let spec = EnsembleSpec::new(1, 3);
        let stats = ensemble(&spec, &g, |seed| {
            Ok(SamplePath {
                grid: g,
                values: vec![seed as f64 * 0.0 + 1.5; g.len()],
                seed,
            })
        })
        .unwrap();
        assert!(!stats.variance_defined);
        assert_eq!(stats.mean, vec![1.5; 5]);
        assert_eq!(stats.variance, vec![0.0; 5]);
    }

    #[test]
    fn deterministic_factory_has_zero_variance() {
        let sis = SisParams::new(0.5, 0.4, 0.8).unwrap();
        let g = TimeGrid::new(5.0, 500).unwrap();
        let spec = EnsembleSpec::new(10, 1);
        let stats = ensemble(&spec, &g, |seed| {
            let y = SamplePath {
                grid: g,
                values: vec![0.5; g.len()],
                seed,
            };
            simulate_perturbed_sis(&sis, &y)
        })
        .unwrap();
        assert!(stats.variance.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn failing_path_reports_its_seed() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let spec = EnsembleSpec::new(100, 3);
        let err = ensemble(&spec, &g, |seed| {
            if seed == spec.seed(70) {
                Err(Error::Numeric("boom".into()))
            } else {
                Ok(SamplePath {
                    grid: g,
                    values: vec![0.0; g.len()],
                    seed,
                })
            }
        })
        .unwrap_err();
        match err {
            Error::PathFailed { index, seed, .. } => {
                assert_eq!(index, 70);
                assert_eq!(seed, spec.seed(70));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_ensemble_is_rejected() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let spec = EnsembleSpec::new(0, 3);
        assert!(ensemble(&spec, &g, |_| unreachable!()).is_err());
    }
}
