use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sis_perturb::config::Scenario;
use sis_perturb::scenario::{
    preset, reproduce_with, run_comparison, run_corrections, run_scenario, run_simulation,
    scenario_verdict, simulate_scenario, FigureId, RunError, RunResult,
};

/// Naturally perturbed SIS model: simulation, classification and
/// perturbation-series corrections.
///
/// Worker threads can be capped with SIS_PERTURB_THREADS.
#[derive(Parser)]
#[command(name = "sis-perturb", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Output directory (overrides [output] dir; default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed of the ensemble.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of ensemble paths.
    #[arg(long)]
    paths: Option<usize>,
    /// Simulation time step; must divide the horizon.
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Args)]
struct WithConfig {
    /// Scenario file.
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// Full run: ensemble, series, verdict and metadata.
    Run(WithConfig),
    /// Ensemble statistics of the infected fraction.
    Simulate(WithConfig),
    /// Print the long-run verdict as one JSON line.
    Classify(WithConfig),
    /// Correction series and first-order variance.
    Correct(WithConfig),
    /// CIR versus additive-noise first-order curves (cir scenarios).
    Compare(WithConfig),
    /// Run a stored figure preset.
    Reproduce {
        /// One of fig1, fig2, fig3a, fig3b, fig5, fig6a, fig6b.
        #[arg(value_parser = parse_figure)]
        figure: FigureId,
        #[command(flatten)]
        overrides: Overrides,
    },
}

fn parse_figure(s: &str) -> Result<FigureId, String> {
    s.parse().map_err(|e: RunError| e.to_string())
}

fn apply(mut scn: Scenario, o: &Overrides) -> RunResult<(Scenario, PathBuf)> {
    if let Some(seed) = o.seed {
        scn.seed = seed;
    }
    if let Some(paths) = o.paths {
        scn.paths = paths;
    }
    if let Some(dt) = o.dt {
        scn.dt = dt;
    }
    if let Some(out) = &o.out {
        scn.out_dir = Some(out.clone());
    }
    // re-validate through the parser so overrides get the same checks
    let scn = Scenario::from_ini(&scn.to_ini())?;
    let dir = scn.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    Ok((scn, dir))
}

fn load(path: &Path, o: &Overrides) -> RunResult<(Scenario, PathBuf)> {
    let text = std::fs::read_to_string(path).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    apply(Scenario::parse(&text)?, o)
}

fn report(files: Vec<PathBuf>) {
    for f in files {
        println!("{}", f.display());
    }
}

fn run(cli: Cli) -> RunResult<()> {
    match cli.command {
        Command::Run(c) => {
            let (scn, dir) = load(&c.config, &c.overrides)?;
            report(run_scenario(&scn, &dir)?);
        }
        Command::Simulate(c) => {
            let (scn, dir) = load(&c.config, &c.overrides)?;
            report(run_simulation(&scn, &dir)?);
        }
        Command::Classify(c) => {
            let (scn, _) = load(&c.config, &c.overrides)?;
            let sim = match scn.model {
                sis_perturb::config::ModelSpec::Generic { .. } => Some(simulate_scenario(&scn)?),
                _ => None,
            };
            println!("{}", scenario_verdict(&scn, sim.as_ref())?.to_record());
        }
        Command::Correct(c) => {
            let (scn, dir) = load(&c.config, &c.overrides)?;
            report(run_corrections(&scn, &dir)?);
        }
        Command::Compare(c) => {
            let (scn, dir) = load(&c.config, &c.overrides)?;
            report(run_comparison(&scn, &dir)?);
        }
        Command::Reproduce { figure, overrides } => {
            let overrides = Overrides {
                out: Some(
                    overrides
                        .out
                        .clone()
                        .unwrap_or_else(|| PathBuf::from("out").join(figure.as_str())),
                ),
                ..overrides
            };
            let (scn, dir) = apply(preset(figure), &overrides)?;
            report(reproduce_with(figure, &scn, &dir)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
