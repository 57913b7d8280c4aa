//! The correction terms against Monte Carlo and against refined numerics.

use sis_perturb::corrections::{
    CorrectionConfig, DerivativeScope, GrayCorrections, GrayWeight, NaturalCorrections, Observable,
    PLATEAU_TOL,
};
use sis_perturb::diffusions::{CirParams, GrayParams, NaturalModel};
use sis_perturb::simulate::{
    ensemble, simulate_cir, simulate_gray_sis, simulate_perturbed_sis, EnsembleSpec, TimeGrid,
};
use sis_perturb::sis::SisParams;

const C: f64 = 0.1;
const GAMMA: f64 = 0.1;
const X: f64 = 0.3;

fn cir() -> CirParams {
    CirParams::new(0.02, 0.2, 0.032, 0.2).unwrap()
}

fn engine(cfg: CorrectionConfig) -> NaturalCorrections {
    let pair = NaturalModel::Cir(cir()).coefficient_pair(C).unwrap();
    NaturalCorrections::new(GAMMA, pair, Observable::identity(), cfg).unwrap()
}

#[test]
fn first_order_term_matches_monte_carlo_at_short_times() {
    let grid = TimeGrid::new(10.0, 1_000).unwrap();
    let sis = SisParams::new(0.2, GAMMA, X).unwrap();
    let stats = ensemble(&EnsembleSpec::new(4000, 77), &grid, |s| {
        simulate_perturbed_sis(&sis, &simulate_cir(&cir(), &grid, s)?)
    })
    .unwrap();
    let e = engine(CorrectionConfig::default());
    for t in [2.5, 5.0, 10.0] {
        let k = grid.nearest_index(t);
        let u0 = e.u0(t, X, 0.2).unwrap();
        let u1 = e.u_n(1, t, X, 0.2).unwrap();
        let lhs = (stats.mean[k] - u0) / C;
        let z = (lhs - u1).abs() / (stats.stderr[k] / C);
        assert!(z < 3.0, "t {t}: (mean - u0)/c = {lhs}, u1 = {u1}, z = {z}");
    }
}

#[test]
fn first_order_term_is_on_a_convergence_plateau() {
    let e = engine(CorrectionConfig::default());
    for t in [5.0, 20.0, 50.0] {
        for y in [0.15, 0.2, 0.3] {
            let c = e.u_n_checked(1, t, X, y).unwrap();
            assert!(c.rel_change <= PLATEAU_TOL, "t {t} y {y}: {c:?}");
            assert!(c.warning.is_none());
        }
    }
}

#[test]
fn richardson_agrees_with_plain_differences() {
    let plain = engine(CorrectionConfig::default());
    let rich = engine(CorrectionConfig {
        richardson: true,
        ..Default::default()
    });
    for t in [5.0, 30.0] {
        let a = plain.u_n(1, t, X, 0.2).unwrap();
        let b = rich.u_n(1, t, X, 0.2).unwrap();
        assert!((a - b).abs() <= PLATEAU_TOL * b.abs(), "t {t}: {a} vs {b}");
    }
}

#[test]
fn second_order_term_is_finite_and_vanishes_at_start() {
    let e = engine(CorrectionConfig {
        max_order: 2,
        ..Default::default()
    });
    assert_eq!(e.u_n(2, 0.0, X, 0.2).unwrap(), 0.0);
    let s = e.series(10.0, X, 0.2, C).unwrap();
    assert_eq!(s.terms.len(), 3);
    assert!(s.terms.iter().all(|v| v.is_finite()));
}

#[test]
fn total_scope_is_a_different_recursion() {
    let state = engine(CorrectionConfig::default());
    let total = engine(CorrectionConfig {
        scope: DerivativeScope::Total,
        ..Default::default()
    });
    let a = state.u_n(1, 20.0, X, 0.2).unwrap();
    let b = total.u_n(1, 20.0, X, 0.2).unwrap();
    assert!(b.is_finite());
    assert!((a - b).abs() > 1e-3 * a.abs(), "{a} vs {b}");
}

#[test]
fn gray_generator_weight_matches_monte_carlo() {
    let gray = GrayParams::from_sigma(0.2, GAMMA, 0.1, C).unwrap();
    let grid = TimeGrid::new(10.0, 2_000).unwrap();
    let stats = ensemble(&EnsembleSpec::new(4000, 5), &grid, |s| {
        simulate_gray_sis(&gray, X, &grid, s)
    })
    .unwrap();
    let g =
        GrayCorrections::new(gray, Observable::identity(), CorrectionConfig::default()).unwrap();
    for t in [5.0, 10.0] {
        let k = grid.nearest_index(t);
        let g0 = g.g0(t, X).unwrap();
        let g1 = g.g_n(1, t, X).unwrap();
        let lhs = (stats.mean[k] - g0) / C;
        let z = (lhs - g1).abs() / (stats.stderr[k] / C);
        assert!(z < 3.0, "t {t}: (mean - g0)/c = {lhs}, g1 = {g1}, z = {z}");
    }
}

#[test]
fn gray_weights_are_ordered() {
    // x²(1-x)² ≤ x(1-x) ≤ 1 on (0, 1); with a convex-in-x g₀ the terms keep that order
    let gray = GrayParams::from_sigma(0.2, GAMMA, 0.1, C).unwrap();
    let term = |w| {
        let cfg = CorrectionConfig {
            gray_weight: w,
            ..Default::default()
        };
        GrayCorrections::new(gray, Observable::identity(), cfg)
            .unwrap()
            .g_n(1, 10.0, X)
            .unwrap()
    };
    let (g, l, u) = (
        term(GrayWeight::Generator),
        term(GrayWeight::Linear),
        term(GrayWeight::Unweighted),
    );
    assert!(g.abs() < l.abs() && l.abs() < u.abs(), "{g} {l} {u}");
}
