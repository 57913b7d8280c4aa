use sis_perturb::asymptotics::{batch_means_stderr, ergodic_average};
use sis_perturb::diffusions::{cir_mean, CirParams, GrayParams, LogisticParams, NaturalModel};
use sis_perturb::simulate::{
    ensemble, simulate_cir, simulate_gray_sis, simulate_logistic, simulate_perturbed_sis,
    EnsembleSpec, SamplePath, TimeGrid,
};
use sis_perturb::sis::{flow, SisParams};

#[test]
fn cir_ensemble_follows_mean_from_off_mean_start() {
    let cir = CirParams::new(0.3, 0.5, 0.2, 0.1).unwrap();
    let grid = TimeGrid::new(10.0, 2_000).unwrap();
    let stats = ensemble(&EnsembleSpec::new(2000, 3), &grid, |s| {
        simulate_cir(&cir, &grid, s)
    })
    .unwrap();
    for t in [1.0, 3.0, 10.0] {
        let k = grid.nearest_index(t);
        let z = (stats.mean[k] - cir_mean(t, &cir)).abs() / stats.stderr[k];
        assert!(z < 4.0, "t {t}: z {z}");
    }
}

#[test]
fn ensemble_does_not_depend_on_worker_count() {
    let cir = CirParams::new(0.05, 0.5, 0.1, 0.5).unwrap();
    let grid = TimeGrid::new(5.0, 500).unwrap();
    let run = |threads| {
        let spec = EnsembleSpec::new(200, 42).with_threads(threads);
        ensemble(&spec, &grid, |s| simulate_cir(&cir, &grid, s)).unwrap()
    };
    let one = run(Some(1));
    assert_eq!(one, run(Some(3)));
    assert_eq!(one, run(None));
}

#[test]
fn constant_perturbation_reproduces_deterministic_flow() {
    let grid = TimeGrid::new(40.0, 4_000).unwrap();
    let y = SamplePath {
        grid,
        values: vec![0.5; grid.len()],
        seed: 0,
    };
    let sis = SisParams::new(0.5, 0.4, 0.8).unwrap();
    let i = simulate_perturbed_sis(&sis, &y).unwrap();
    for (t, v) in i.points() {
        assert!((v - flow(t, 0.8, 0.5, 0.4).unwrap()).abs() < 1e-10, "t {t}");
    }
}

#[test]
fn logistic_time_average_matches_stationary_mean() {
    let p = LogisticParams::new(0.5, 1.0, 0.3, 0.4).unwrap();
    let mean = NaturalModel::Logistic(p).stationary_mean().unwrap();
    let grid = TimeGrid::new(4_000.0, 400_000).unwrap();
    let path = simulate_logistic(&p, &grid, 8).unwrap();
    let avg = ergodic_average(&path).unwrap();
    let se = batch_means_stderr(&path, 20).unwrap();
    assert!(
        (avg - mean).abs() < 4.0 * se + 2e-3,
        "{avg} vs {mean} (se {se})"
    );
}

#[test]
fn gray_paths_stay_in_range() {
    let gray = GrayParams::from_sigma(0.5, 0.4, 0.6, 0.5).unwrap();
    let grid = TimeGrid::new(100.0, 2_000).unwrap();
    for seed in 0..20 {
        let p = simulate_gray_sis(&gray, 0.8, &grid, seed).unwrap();
        assert!(p.values.iter().all(|v| (0.0..1.0).contains(v)));
    }
}

#[test]
fn same_seed_same_path() {
    let cir = CirParams::new(0.05, 0.89, 0.1, 0.89).unwrap();
    let grid = TimeGrid::new(20.0, 2_000).unwrap();
    assert_eq!(
        simulate_cir(&cir, &grid, 17).unwrap(),
        simulate_cir(&cir, &grid, 17).unwrap()
    );
    assert_ne!(
        simulate_cir(&cir, &grid, 17).unwrap().values,
        simulate_cir(&cir, &grid, 18).unwrap().values
    );
}
