//! Running scenarios and the stored figure presets.
//!
//! Every run writes plot-ready CSV (floats with 17 significant digits) plus
//! `metadata.ini`, the resolved scenario with a `[meta]` section. Feeding
//! the metadata file back in reproduces the CSVs byte for byte.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::asymptotics::{classify_gray, classify_natural, ergodic_average, Regime, Verdict};
use crate::config::{ConfigError, Ini, ModelSpec, Scenario, META_SECTION};
use crate::corrections::{
    compare_perturbations, variance_first_order, ComparisonRow, CorrectionConfig, GrayCorrections,
    NaturalCorrections, Observable, SeriesEval,
};
use crate::diffusions::{CirParams, GrayParams};
use crate::error::Error;
use crate::simulate::{
    for_each_path, simulate_generic, simulate_gray_sis, simulate_natural, simulate_perturbed_sis,
    EnsembleSpec, EnsembleStats, PathAccumulator, SamplePath, TimeGrid,
};
use crate::sis::{deterministic_limit, flow_unchecked};

/// Written into every metadata file.
pub const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Sample paths kept for figure output.
pub const SAMPLE_PATHS: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("unknown figure `{0}`; expected one of {ids}", ids = FigureId::ALL_NAMES.join(", "))]
    UnknownFigure(String),
    #[error("{0}")]
    Unsupported(String),
}

pub type RunResult<T> = std::result::Result<T, RunError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Formats one CSV table.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "{v:.16e}").unwrap();
        }
        out.push('\n');
    }
    out
}

fn write_file(dir: &Path, name: &str, contents: &str) -> RunResult<PathBuf> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(io_err(&path))?;
    Ok(path)
}

/// First whole time at which `|I^D_t(x) - L| ≤ 0.01|x - L|`, where `L` is
/// the deterministic limit.
pub fn relaxation_horizon(x: f64, beta: f64, gamma: f64) -> crate::Result<f64> {
    let limit = deterministic_limit(beta, gamma)?;
    let target = 0.01 * (x - limit).abs();
    let close = |t: f64| (flow_unchecked(t, x, beta, gamma) - limit).abs() <= target;
    if close(0.0) {
        return Ok(1.0);
    }
    let mut hi = 1.0;
    while !close(hi) {
        hi *= 2.0;
        if hi > 1e9 {
            return Err(Error::Numeric(format!(
                "flow from {x} does not approach its limit {limit}"
            )));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if close(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi.ceil())
}

fn grid_of(scn: &Scenario) -> crate::Result<TimeGrid> {
    TimeGrid::new(scn.t_end, scn.n_steps())
}

fn ensemble_spec(scn: &Scenario) -> EnsembleSpec {
    EnsembleSpec::new(scn.paths, scn.seed)
}

/// Perturbation and infected-fraction paths for one seed. The additive
/// model has no separate perturbation path.
pub fn scenario_path(
    scn: &Scenario,
    grid: &TimeGrid,
    seed: u64,
) -> crate::Result<(Option<SamplePath>, SamplePath)> {
    match &scn.model {
        ModelSpec::Gray { beta, sigma } => {
            let gray = GrayParams::from_sigma(*beta, scn.gamma, *sigma, scn.scale_c)?;
            Ok((None, simulate_gray_sis(&gray, scn.x0, grid, seed)?))
        }
        ModelSpec::Generic { y0, .. } => {
            let pair = scn.model.coefficient_pair(scn.scale_c)?.unwrap();
            let y = simulate_generic(&pair, *y0, grid, seed)?;
            let i = simulate_perturbed_sis(&scn.sis(), &y)?;
            Ok((Some(y), i))
        }
        m => {
            let y = simulate_natural(&m.natural().unwrap(), grid, seed)?;
            let i = simulate_perturbed_sis(&scn.sis(), &y)?;
            Ok((Some(y), i))
        }
    }
}

/// Ensemble of the infected fraction plus per-path perturbation averages.
#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub stats: EnsembleStats,
    /// Time averages of each perturbation path, in path order.
    pub y_time_averages: Vec<f64>,
    /// The first [`SAMPLE_PATHS`] paths.
    pub samples: Vec<(Option<SamplePath>, SamplePath)>,
}

pub fn simulate_scenario(scn: &Scenario) -> crate::Result<SimulationResult> {
    let grid = grid_of(scn)?;
    let spec = ensemble_spec(scn);
    let mut acc = PathAccumulator::new(grid);
    let mut y_time_averages = Vec::new();
    let mut samples = Vec::new();
    let mut push_err = None;
    for_each_path(
        &spec,
        |index, seed| {
            let (y, i) = scenario_path(scn, &grid, seed)?;
            let avg = y.as_ref().map(ergodic_average).transpose()?;
            let keep = (index < SAMPLE_PATHS).then(|| (y, i.clone()));
            Ok((i.values, avg, keep))
        },
        |_, (values, avg, keep)| {
            if let Err(e) = acc.push(&values) {
                push_err.get_or_insert(e);
            }
            y_time_averages.extend(avg);
            samples.extend(keep);
        },
    )?;
    if let Some(e) = push_err {
        return Err(e);
    }
    Ok(SimulationResult {
        stats: acc.finish(),
        y_time_averages,
        samples,
    })
}

/// Long-run verdict. Named models use their stationary mean, the additive
/// model its closed-form conditions, and a generic model the ensemble of
/// perturbation time averages (so `sim` is required for it).
pub fn scenario_verdict(scn: &Scenario, sim: Option<&SimulationResult>) -> RunResult<Verdict> {
    match &scn.model {
        ModelSpec::Gray { beta, sigma } => Ok(classify_gray(*beta, scn.gamma, *sigma)?),
        ModelSpec::Generic { .. } => {
            let sim = sim.ok_or_else(|| {
                RunError::Unsupported(
                    "classifying a generic model needs simulated perturbation paths".into(),
                )
            })?;
            let n = sim.y_time_averages.len() as f64;
            let mean = sim.y_time_averages.iter().sum::<f64>() / n;
            let mut v = classify_natural(mean, scn.gamma)?;
            v.conditions
                .push(("stationary mean estimated from paths".into(), true));
            Ok(v)
        }
        m => match m.natural().unwrap().stationary_mean() {
            Ok(mean) => Ok(classify_natural(mean, scn.gamma)?),
            Err(Error::NotErgodic { condition, .. }) => Ok(Verdict {
                regime: Regime::Inconclusive,
                r0: f64::NAN,
                level: None,
                conditions: vec![(condition.to_string(), false)],
            }),
            Err(e) => Err(e.into()),
        },
    }
}

/// Times of the output nodes.
pub fn output_times(scn: &Scenario) -> crate::Result<Vec<f64>> {
    let grid = grid_of(scn)?;
    Ok(scn
        .output_indices()
        .into_iter()
        .map(|k| grid.time(k))
        .collect())
}

fn engine_config(scn: &Scenario) -> CorrectionConfig {
    scn.corrections
}

/// Series terms at the output times, `φ(x) = x`.
pub fn scenario_series(scn: &Scenario, times: &[f64]) -> crate::Result<Vec<SeriesEval>> {
    let cfg = engine_config(scn);
    match scn.model.coefficient_pair(scn.scale_c)? {
        Some(pair) => NaturalCorrections::new(scn.gamma, pair, Observable::identity(), cfg)?
            .series_curve(times, scn.x0, scn.model.y0(), scn.scale_c),
        None => GrayCorrections::new(scn.gray_params().unwrap(), Observable::identity(), cfg)?
            .series_curve(times, scn.x0, scn.scale_c),
    }
}

/// First-order variance at the output times (perturbation-process models only).
pub fn scenario_variance(scn: &Scenario, times: &[f64]) -> RunResult<Vec<f64>> {
    let pair = scn.model.coefficient_pair(scn.scale_c)?.ok_or_else(|| {
        RunError::Unsupported("the variance correction needs a perturbation process".into())
    })?;
    let cfg = engine_config(scn);
    let y = scn.model.y0();
    Ok(times
        .par_iter()
        .map(|&t| variance_first_order(t, scn.x0, y, scn.scale_c, scn.gamma, &pair, &cfg))
        .collect::<crate::Result<Vec<_>>>()?)
}

/// CIR versus additive noise of the same amplitude around `β = b`.
pub fn scenario_comparison(scn: &Scenario, times: &[f64]) -> RunResult<Vec<ComparisonRow>> {
    let ModelSpec::Cir(cir) = &scn.model else {
        return Err(RunError::Unsupported(
            "the perturbation comparison needs a cir scenario".into(),
        ));
    };
    let gray = GrayParams::from_sigma(cir.b, scn.gamma, cir.sigma, scn.scale_c)?;
    Ok(compare_perturbations(
        times,
        scn.x0,
        cir.b,
        scn.gamma,
        scn.scale_c,
        cir,
        &gray,
        &engine_config(scn),
    )?)
}

/// Metadata text: the resolved scenario plus a `[meta]` section.
pub fn metadata(scn: &Scenario, notes: &[String]) -> String {
    let mut ini: Ini = scn.to_ini();
    ini.set(META_SECTION, "version", VERSION);
    ini.set(META_SECTION, "n_steps", scn.n_steps().to_string());
    ini.set(META_SECTION, "dt", scn.dt.to_string());
    ini.set(META_SECTION, "base_seed", scn.seed.to_string());
    ini.set(
        META_SECTION,
        "path_seeds",
        "splitmix64 finalizer of base_seed + (index + 1) * 0x9e3779b97f4a7c15, ChaCha8 per path",
    );
    for (i, note) in notes.iter().enumerate() {
        ini.set(META_SECTION, &format!("note{}", i + 1), note.as_str());
    }
    ini.to_string()
}

fn ensemble_csv(stats: &EnsembleStats, indices: &[usize]) -> String {
    csv_table(
        &["t", "mean", "variance", "stderr"],
        indices.iter().map(|&k| {
            vec![
                stats.grid.time(k),
                stats.mean[k],
                stats.variance[k],
                stats.stderr[k],
            ]
        }),
    )
}

fn series_csv(times: &[f64], series: &[SeriesEval]) -> String {
    let order = series.first().map_or(0, |s| s.terms.len() - 1);
    let mut header = vec!["t".to_string(), "u0".to_string(), "u1".to_string()];
    for n in 2..=order {
        header.push(format!("u{n}"));
    }
    header.push("series_value".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    csv_table(
        &header,
        times.iter().zip(series).map(|(&t, s)| {
            let mut row = vec![t];
            row.extend(&s.terms);
            if s.terms.len() == 1 {
                row.push(0.0);
            }
            row.push(s.value());
            row
        }),
    )
}

fn variance_csv(times: &[f64], var: &[f64]) -> String {
    csv_table(
        &["t", "var_correction"],
        times.iter().zip(var).map(|(&t, &v)| vec![t, v]),
    )
}

fn comparison_csv(rows: &[ComparisonRow]) -> String {
    csv_table(
        &["t", "u0", "g0", "cir_first_order", "gray_first_order"],
        rows.iter()
            .map(|r| vec![r.t, r.u0, r.g0, r.cir_first_order, r.gray_first_order]),
    )
}

fn paths_csv(scn: &Scenario, samples: &[(Option<SamplePath>, SamplePath)]) -> String {
    let mut header = vec!["t".to_string()];
    for (k, (y, _)) in samples.iter().enumerate() {
        if y.is_some() {
            header.push(format!("y_{k}"));
        }
    }
    for k in 0..samples.len() {
        header.push(format!("i_{k}"));
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let idx = scn.output_indices();
    csv_table(
        &header,
        idx.iter().map(|&n| {
            let mut row = vec![samples[0].1.grid.time(n)];
            row.extend(
                samples
                    .iter()
                    .filter_map(|(y, _)| y.as_ref().map(|y| y.values[n])),
            );
            row.extend(samples.iter().map(|(_, i)| i.values[n]));
            row
        }),
    )
}

/// Ensemble, series, verdict and metadata for one scenario.
pub fn run_scenario(scn: &Scenario, dir: &Path) -> RunResult<Vec<PathBuf>> {
    run_with_notes(scn, dir, &[]).map(|(files, _)| files)
}

fn run_with_notes(
    scn: &Scenario,
    dir: &Path,
    notes: &[String],
) -> RunResult<(Vec<PathBuf>, SimulationResult)> {
    let sim = simulate_scenario(scn)?;
    let times = output_times(scn)?;
    let series = scenario_series(scn, &times)?;
    let verdict = scenario_verdict(scn, Some(&sim))?;
    let files = vec![
        write_file(
            dir,
            "ensemble.csv",
            &ensemble_csv(&sim.stats, &scn.output_indices()),
        )?,
        write_file(dir, "series.csv", &series_csv(&times, &series))?,
        write_file(dir, "verdict.json", &(verdict.to_record() + "\n"))?,
        write_file(dir, "metadata.ini", &metadata(scn, notes))?,
    ];
    Ok((files, sim))
}

/// `ensemble.csv` and metadata only.
pub fn run_simulation(scn: &Scenario, dir: &Path) -> RunResult<Vec<PathBuf>> {
    let sim = simulate_scenario(scn)?;
    Ok(vec![
        write_file(
            dir,
            "ensemble.csv",
            &ensemble_csv(&sim.stats, &scn.output_indices()),
        )?,
        write_file(dir, "metadata.ini", &metadata(scn, &[]))?,
    ])
}

/// `series.csv`, `variance.csv` (when a perturbation process exists) and
/// metadata; no simulation.
pub fn run_corrections(scn: &Scenario, dir: &Path) -> RunResult<Vec<PathBuf>> {
    let times = output_times(scn)?;
    let series = scenario_series(scn, &times)?;
    let mut files = vec![write_file(dir, "series.csv", &series_csv(&times, &series))?];
    if !matches!(scn.model, ModelSpec::Gray { .. }) {
        let var = scenario_variance(scn, &times)?;
        files.push(write_file(
            dir,
            "variance.csv",
            &variance_csv(&times, &var),
        )?);
    }
    files.push(write_file(dir, "metadata.ini", &metadata(scn, &[]))?);
    Ok(files)
}

/// `comparison.csv` and metadata.
pub fn run_comparison(scn: &Scenario, dir: &Path) -> RunResult<Vec<PathBuf>> {
    let times = output_times(scn)?;
    let rows = scenario_comparison(scn, &times)?;
    Ok(vec![
        write_file(dir, "comparison.csv", &comparison_csv(&rows))?,
        write_file(
            dir,
            "metadata.ini",
            &metadata(
                scn,
                &["additive noise amplitude equals the cir sigma".into()],
            ),
        )?,
    ])
}

/// Figures with stored presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FigureId {
    Fig1,
    Fig2,
    Fig3a,
    Fig3b,
    Fig5,
    Fig6a,
    Fig6b,
}

impl FigureId {
    pub const ALL: [FigureId; 7] = [
        Self::Fig1,
        Self::Fig2,
        Self::Fig3a,
        Self::Fig3b,
        Self::Fig5,
        Self::Fig6a,
        Self::Fig6b,
    ];

    pub const ALL_NAMES: [&'static str; 7] =
        ["fig1", "fig2", "fig3a", "fig3b", "fig5", "fig6a", "fig6b"];

    pub fn as_str(&self) -> &'static str {
        Self::ALL_NAMES[Self::ALL.iter().position(|f| f == self).unwrap()]
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FigureId {
    type Err = RunError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL_NAMES
            .iter()
            .position(|n| *n == s)
            .map(|i| Self::ALL[i])
            .ok_or_else(|| RunError::UnknownFigure(s.to_string()))
    }
}

fn cir_preset(
    name: &str,
    cir: CirParams,
    gamma: f64,
    x0: f64,
    t_end: f64,
    paths: usize,
    output_nodes: usize,
) -> Scenario {
    Scenario {
        name: name.to_string(),
        model: ModelSpec::Cir(cir),
        gamma,
        x0,
        t_end,
        dt: 1e-2,
        paths,
        seed: 20_240_601,
        scale_c: 0.1,
        corrections: CorrectionConfig::default(),
        output_nodes,
        out_dir: None,
    }
}

/// Stored parameters of a figure.
///
/// Figures 1 and 2 run to `t = 400`. The correction figures run to the
/// [`relaxation_horizon`] of `u₀`.
pub fn preset(id: FigureId) -> Scenario {
    let relax = |x: f64, b: f64, g: f64| relaxation_horizon(x, b, g).unwrap();
    let (a, s_small, s_large) = (0.02, 0.032, 0.063);
    match id {
        FigureId::Fig1 => cir_preset(
            "fig1",
            CirParams {
                a: 0.05,
                b: 0.89,
                sigma: 0.1,
                y0: 0.89,
            },
            0.92,
            0.8,
            400.0,
            200,
            401,
        ),
        FigureId::Fig2 => cir_preset(
            "fig2",
            CirParams {
                a: 0.05,
                b: 0.5,
                sigma: 0.1,
                y0: 0.5,
            },
            0.4,
            0.8,
            400.0,
            200,
            401,
        ),
        FigureId::Fig3a | FigureId::Fig6a => cir_preset(
            id.as_str(),
            CirParams {
                a,
                b: 0.45,
                sigma: s_large,
                y0: 0.45,
            },
            0.5,
            0.3,
            relax(0.3, 0.45, 0.5),
            1500,
            50,
        ),
        FigureId::Fig3b | FigureId::Fig6b => cir_preset(
            id.as_str(),
            CirParams {
                a,
                b: 0.2,
                sigma: s_small,
                y0: 0.2,
            },
            0.1,
            0.3,
            relax(0.3, 0.2, 0.1),
            1500,
            50,
        ),
        FigureId::Fig5 => cir_preset(
            "fig5",
            CirParams {
                a,
                b: 0.5,
                sigma: s_large,
                y0: 0.5,
            },
            0.3,
            0.3,
            relax(0.3, 0.5, 0.3),
            1500,
            50,
        ),
    }
}

fn horizon_note(id: FigureId) -> Vec<String> {
    match id {
        FigureId::Fig1 => vec![],
        FigureId::Fig2 => vec![
            "r0 = beta/gamma = 1.25; a value of 1.5 for this configuration would contradict the level 0.2".into(),
        ],
        _ => vec!["t_end is the first whole time at which u0 is within 1% of its initial distance to the deterministic limit".into()],
    }
}

/// Runs the preset of `id` into `dir`.
pub fn reproduce_figure(id: FigureId, dir: &Path) -> RunResult<Vec<PathBuf>> {
    reproduce_with(id, &preset(id), dir)
}

/// Runs figure `id` with a (possibly modified) preset scenario.
pub fn reproduce_with(id: FigureId, scn: &Scenario, dir: &Path) -> RunResult<Vec<PathBuf>> {
    let notes = horizon_note(id);
    let (mut files, sim) = run_with_notes(scn, dir, &notes)?;
    match id {
        FigureId::Fig1 | FigureId::Fig2 => {
            files.push(write_file(dir, "paths.csv", &paths_csv(scn, &sim.samples))?);
        }
        FigureId::Fig5 => {
            let times = output_times(scn)?;
            let var = scenario_variance(scn, &times)?;
            files.push(write_file(
                dir,
                "variance.csv",
                &variance_csv(&times, &var),
            )?);
        }
        FigureId::Fig6a | FigureId::Fig6b => {
            let times = output_times(scn)?;
            let rows = scenario_comparison(scn, &times)?;
            files.push(write_file(dir, "comparison.csv", &comparison_csv(&rows))?);
        }
        FigureId::Fig3a | FigureId::Fig3b => {}
    }
    Ok(files)
}
