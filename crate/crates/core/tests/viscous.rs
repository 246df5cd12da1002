mod common;

use common::{down, lw, lw_roots, up, FBAR};
use ftl_core::model::{RoadCondition, SpeedLimit};
use ftl_core::viscous::{
    default_span, middle_state, pde_solve, shock_speed, stationary_profile, viscous_existence,
    PdeOptions, PdeState, ViscousError,
};

const EPS: f64 = 0.2;

fn canonical() -> Vec<(&'static str, RoadCondition, f64, f64)> {
    let (a1, a2) = lw_roots(2.0, FBAR);
    let (b1, b2) = lw_roots(1.0, FBAR);
    vec![
        ("1A", down(), a1, b2),
        ("1B", down(), a1, b1),
        ("1C", down(), a2, b2),
        ("1D", down(), a2, b1),
        ("2A", up(), b1, a2),
        ("2B", up(), b1, a1),
        ("2C", up(), b2, a2),
        ("2D", up(), b2, a1),
    ]
}

#[test]
fn existence_by_case() {
    let m = lw();
    for (label, road, rm, rp) in canonical() {
        let e = viscous_existence(&m, &road, rm, rp).unwrap();
        assert_eq!(e.exists(), !label.ends_with('D'), "{label}");
    }
    let e = viscous_existence(&m, &down(), lw_roots(2.0, FBAR).0, 0.75).unwrap();
    let (lo, hi) = e.feasible.unwrap();
    assert!(e.increasing && lo < hi);
}

#[test]
fn witnesses_give_monotone_profiles() {
    let m = lw();
    for (label, road, rm, rp) in canonical() {
        let e = viscous_existence(&m, &road, rm, rp).unwrap();
        let Some(r0) = e.rho_hat() else { continue };
        let p = stationary_profile(&m, &road, EPS, e.fbar, r0, default_span(&m, EPS)).unwrap();
        assert!(p.is_monotone(1e-10), "{label}");
        let (l, r) = p.limits();
        assert!(
            (l - rm).abs() < 1e-3 && (r - rp).abs() < 1e-3,
            "{label}: {l} {r}"
        );
        assert!(p.max_residual(&m) <= 1e-6 / EPS, "{label}");
    }
}

#[test]
fn case_1a_anchor_half() {
    let m = lw();
    let p = stationary_profile(&m, &down(), EPS, FBAR, 0.5, default_span(&m, EPS)).unwrap();
    let (l, r) = p.limits();
    assert!((l - lw_roots(2.0, FBAR).0).abs() < 1e-3);
    assert!((r - 0.75).abs() < 1e-3);
    assert!(p.is_monotone(1e-10));
    assert_eq!(p.eval(0.0), 0.5);
}

#[test]
fn case_1b_profile_is_flat_ahead() {
    let m = lw();
    let p = stationary_profile(&m, &down(), EPS, FBAR, 0.25, default_span(&m, EPS)).unwrap();
    for (&x, &r) in p.xs().iter().zip(p.values()) {
        if x >= 0.0 {
            assert_eq!(r, 0.25);
        }
    }
    assert!((p.limits().0 - lw_roots(2.0, FBAR).0).abs() < 1e-3);
}

#[test]
fn inadmissible_anchor_leaves_the_unit_interval() {
    let m = lw();
    let err = stationary_profile(&m, &down(), EPS, FBAR, 0.05, default_span(&m, EPS)).unwrap_err();
    assert!(matches!(err, ViscousError::BlowUp { .. }), "{err:?}");
}

#[test]
fn riemann_experiment() {
    let m = lw();
    let road = down();
    let rho_m = middle_state(&m, &road, 0.7).unwrap();
    assert!((rho_m - (0.5 + (0.25f64 - 0.105).sqrt())).abs() < 1e-12);
    let s = shock_speed(&m, 2.0, 0.6, rho_m).unwrap();
    assert!((s + 0.9616).abs() < 1e-4);

    let init = PdeState::riemann(0.6, 0.7, -2.0, 1.0, 1500, 0.02).unwrap();
    let run = pde_solve(
        &init,
        &m,
        SpeedLimit::Jump(road),
        1.0,
        &PdeOptions::default(),
    )
    .unwrap();
    let last = run.states.last().unwrap();
    assert!((last.time - 1.0).abs() < 1e-12);
    assert!(run.max_conservation_error <= 1e-10);

    let half = 0.5 * (0.6 + rho_m);
    let front = last
        .x
        .windows(2)
        .zip(last.rho.windows(2))
        .find(|(_, r)| r[0] < half && r[1] >= half)
        .map(|(x, r)| x[0] + (half - r[0]) / (r[1] - r[0]) * (x[1] - x[0]))
        .unwrap();
    assert!((front + 0.96).abs() < 0.05, "front at {front}");
    assert!((last.eval(-0.3) - 0.8808).abs() < 0.01);
    assert!((last.eval(0.9) - 0.7).abs() < 0.005);
    // Nothing oscillates between the shock and the jump.
    assert!(last.total_variation(-0.6, 0.0) < 1e-2);
}

#[test]
fn uniform_state_stays_put() {
    let m = lw();
    let init = PdeState::from_fn(-1.0, 1.0, 200, 0.05, |_| 0.4).unwrap();
    let run = pde_solve(
        &init,
        &m,
        SpeedLimit::Uniform(1.0),
        0.5,
        &PdeOptions::default(),
    )
    .unwrap();
    for r in &run.states.last().unwrap().rho {
        assert_eq!(*r, 0.4);
    }
}

#[test]
fn maximum_principle_on_a_uniform_road() {
    let m = lw();
    let init = PdeState::from_fn(-1.0, 1.0, 400, 0.01, |x| {
        0.5 + 0.3 * (-(x * 5.0).powi(2)).exp() - 0.2 * (-((x - 0.5) * 8.0).powi(2)).exp()
    })
    .unwrap();
    let opts = PdeOptions {
        record_interval: Some(0.1),
        ..PdeOptions::default()
    };
    let run = pde_solve(&init, &m, SpeedLimit::Uniform(1.0), 0.5, &opts).unwrap();
    assert!(run.max_range_excursion <= 1e-12);
    assert!(run.max_conservation_error <= 1e-10);
    assert_eq!(run.states.len(), 6);
}
