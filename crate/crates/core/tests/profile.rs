mod common;

use common::{down, lw, lw_roots, solve, up, ELL, FBAR};
use ftl_core::model::SpeedLimit;
use ftl_core::numeric::linspace;
use ftl_core::profile::{
    build_family, build_initial_data, generate_positions, has_interior_max_on_first_interval,
    interleaving_violation, invariant_region_violation, max_periodic_residual, periodic_residual,
    solve_q_backward, solve_w_profile, transversality_report, w_shift, InitialKind, Profile,
    ProfileError, Side, SolverOptions,
};

fn opts() -> SolverOptions {
    SolverOptions::default()
}

fn wave() -> Profile {
    solve_w_profile(&lw(), 1.0, FBAR, ELL, &opts()).unwrap()
}

#[test]
fn uniform_road_wave() {
    let w = wave();
    assert!((w.eval(0.0) - 0.5).abs() < 1e-10);
    assert!(w.is_monotone(1e-10));
    assert!((w.asymptote(Side::Left).unwrap().value - 0.25).abs() < 1e-3);
    assert!((w.asymptote(Side::Right).unwrap().value - 0.75).abs() < 1e-3);
    let (res, _) = max_periodic_residual(&w, &lw(), 50).unwrap();
    assert!(res <= 1e-6, "residual {res}");
}

#[test]
fn wave_flattens_near_the_flux_maximum() {
    let fbar = 0.2499;
    let w = solve_w_profile(&lw(), 1.0, fbar, ELL, &opts()).unwrap();
    let (lo, hi) = lw_roots(1.0, fbar);
    assert!(hi - lo < 0.03);
    assert!(w.max_value() - w.min_value() <= hi - lo + 1e-6);
}

#[test]
fn wave_at_the_maximum_is_degenerate() {
    let err = solve_w_profile(&lw(), 1.0, 0.25, ELL, &opts()).unwrap_err();
    assert!(
        matches!(err, ProfileError::DegenerateCase { .. }),
        "{err:?}"
    );
}

#[test]
fn initial_data() {
    let w = wave();
    let m = lw();
    let road = down();
    assert!(w_shift(&w, 0.5).unwrap().abs() < 1e-10);
    let s = w_shift(&w, 0.74).unwrap();
    assert!(s > 0.0 && (w.eval(s) - 0.74).abs() < 1e-10);
    let init = build_initial_data(
        InitialKind::ShiftedW,
        Some(&w),
        0.74,
        &m,
        &road,
        ELL,
        &opts(),
    )
    .unwrap();
    assert!((init.eval(0.0) - 0.74).abs() < 1e-10);
    assert!((init.eval(0.3) - w.eval(s + 0.3)).abs() < 1e-9);
    let flat =
        build_initial_data(InitialKind::Constant, None, 0.75, &m, &road, ELL, &opts()).unwrap();
    assert!(flat.values().iter().all(|&q| q == 0.75));
    let err = build_initial_data(
        InitialKind::ShiftedW,
        Some(&w),
        0.8,
        &m,
        &road,
        ELL,
        &opts(),
    );
    assert!(matches!(err, Err(ProfileError::OutOfRange { .. })));
}

#[test]
fn case_1a_profile() {
    let q = solve(&down(), 0.6, -40.0 * ELL, &opts());
    let (low, _) = lw_roots(2.0, FBAR);
    assert!(q.is_monotone(1e-10));
    assert!(q.x_min() <= -20.0 * ELL);
    assert!((q.asymptote(Side::Left).unwrap().value - low).abs() < 1e-3);
    assert!((q.eval(0.0) - 0.6).abs() < 1e-10);
    let (res, _) = max_periodic_residual(&q, &lw(), 50).unwrap();
    assert!(res <= 1e-6, "residual {res}");
    assert_eq!(has_interior_max_on_first_interval(&q), Ok(false));
}

#[test]
fn case_1a_transversality() {
    let m = lw();
    let q = solve(&down(), 0.6, -40.0 * ELL, &opts());
    let t = transversality_report(&q, &m, opts().slope_cap).unwrap();
    assert!(t.passes(), "{t:?}");
    let y = t.crossing;
    assert!((y + ELL / q.eval(y)).abs() < 1e-10);
    // Left slope at the crossing from the closed form.
    let h = -ELL / y;
    let expected = t.h_prime * (1.0 - m.phi(q.eval(0.0)) / m.phi(h));
    assert!((t.slope_crossing_left - expected).abs() < 1e-6 * t.h_prime.abs());
    assert!(t.slope_crossing_left < t.h_prime && t.slope_crossing_right < t.h_prime);
}

#[test]
fn transversality_needs_a_jump() {
    let c = Profile::constant(0.5, -1.0, 1.0, 0.01, ELL, 0.25, SpeedLimit::Uniform(1.0)).unwrap();
    assert_eq!(
        transversality_report(&c, &lw(), 1e6),
        Err(ProfileError::NotApplicable)
    );
}

#[test]
fn case_1b_constant_datum() {
    let q = solve(&down(), 0.25, -40.0 * ELL, &opts());
    let (low, _) = lw_roots(2.0, FBAR);
    assert!(q.is_monotone(1e-10));
    assert!((q.asymptote(Side::Left).unwrap().value - low).abs() < 1e-3);
    for x in linspace(0.0, q.x_max(), 50) {
        assert_eq!(q.eval(x), 0.25);
    }
}

#[test]
fn case_2a_constant_datum_blows_up() {
    let m = lw();
    let road = up();
    let (_, rho_plus) = lw_roots(2.0, FBAR);
    let init = build_initial_data(
        InitialKind::Constant,
        None,
        rho_plus,
        &m,
        &road,
        ELL,
        &opts(),
    )
    .unwrap();
    match solve_q_backward(&init, &m, &road, ELL, -40.0 * ELL, &opts()) {
        Err(ProfileError::BlowUp { x, .. }) => assert!(x < 0.0 && x > -40.0 * ELL),
        other => panic!("expected blow-up, got {other:?}"),
    }
}

#[test]
fn periodic_residual_detects_a_bump() {
    let m = lw();
    let v = SpeedLimit::Uniform(1.0);
    let c = Profile::constant(0.75, -2.0, 2.0, ELL / 64.0, ELL, FBAR, v).unwrap();
    assert!(periodic_residual(&c, &m, -1.0).unwrap() < 1e-15);
    let bumped = c
        .map_values(|x, q| {
            if (-1.0..-0.8).contains(&x) {
                q + 0.01
            } else {
                q
            }
        })
        .unwrap();
    assert!(periodic_residual(&bumped, &m, -1.1).unwrap() > 1e-4);
    assert!(matches!(
        periodic_residual(&c, &m, 1.9),
        Err(ProfileError::SpanError { .. })
    ));
}

#[test]
fn generated_cars_interleave() {
    let q = solve(&down(), 0.6, -40.0 * ELL, &opts());
    let z = generate_positions(&q, -30.0 * ELL, 0, 30).unwrap();
    for w in z.windows(2) {
        assert!(w[1] - w[0] >= ELL);
        assert!((w[1] - w[0] - ELL / q.eval(w[0])).abs() < 1e-12);
    }
    assert!(interleaving_violation(&q, &z) < 0.0);
    let both = generate_positions(&q, 0.0, 3, 5).unwrap();
    assert_eq!(both[3], 0.0);
    for w in both.windows(2) {
        assert!((w[0] + ELL / q.eval(w[0]) - w[1]).abs() < 1e-10);
    }
}

#[test]
fn invariant_region_holds_in_case_1() {
    let (low, _) = lw_roots(2.0, FBAR);
    for q0 in [0.3, 0.6, 0.75] {
        let q = solve(&down(), q0, -40.0 * ELL, &opts());
        let v = invariant_region_violation(&q, &lw(), low).unwrap();
        assert!(v <= 1e-10, "q0={q0}: {v}");
    }
}

#[test]
fn case_1a_family() {
    let grid = linspace(0.3, 0.75, 8);
    let fam = build_family(&lw(), &down(), ELL, FBAR, &grid, -40.0 * ELL, &opts()).unwrap();
    assert_eq!(fam.len(), 8);
    let (lo, hi) = fam.common_span();
    assert!(fam.min_gap(lo, hi, ELL / 64.0) > 0.0);
    for w in fam.q0s().windows(2) {
        assert!(w[0] < w[1]);
    }
    for m in fam.members() {
        assert!(m.is_monotone(1e-10));
    }
    // Round trip through the label.
    let m = &fam.members()[3];
    for x in [-1.0, -0.1, 0.0, 0.5] {
        let p = fam.psi(x, m.eval(x)).unwrap();
        assert!((p - fam.q0s()[3]).abs() < 1e-9, "x={x}: {p}");
    }
    let above = fam.upper().eval(-0.5) + 0.01;
    assert!(matches!(
        fam.psi(-0.5, above),
        Err(ProfileError::OutsideD { .. })
    ));
    // Halfway between two members in value gives a label between theirs.
    let (a, b) = (&fam.members()[1], &fam.members()[2]);
    let p = fam.psi(-0.2, 0.5 * (a.eval(-0.2) + b.eval(-0.2))).unwrap();
    assert!(p > fam.q0s()[1] && p < fam.q0s()[2]);
}

#[test]
fn single_member_family() {
    let fam = build_family(&lw(), &down(), ELL, FBAR, &[0.5], -40.0 * ELL, &opts()).unwrap();
    assert_eq!(fam.len(), 1);
    assert!(fam.min_gap(-1.0, 1.0, 0.01).is_infinite());
}

#[test]
fn case_2a_family() {
    let (low, _) = lw_roots(1.0, FBAR);
    let grid = linspace(0.25 + 1e-4, 0.75, 6);
    let fam = build_family(&lw(), &up(), ELL, FBAR, &grid, -40.0 * ELL, &opts()).unwrap();
    let (lo, hi) = fam.common_span();
    assert!(fam.min_gap(lo, hi, ELL / 64.0) > 0.0);
    let mut wiggly = 0;
    for m in fam.members() {
        let a = m.asymptote(Side::Left).unwrap();
        assert!((a.value - low).abs() < 1e-3);
        if !m.is_monotone(1e-10) {
            wiggly += 1;
        }
    }
    assert!(wiggly > 0);
}

/// Nodes of the coarse grid on `[a, b]` compared across three resolutions.
fn observed_order(a: f64, b: f64) -> f64 {
    let sol: Vec<Profile> = [16, 32, 64]
        .into_iter()
        .map(|n| {
            let o = SolverOptions {
                steps_per_length: n,
                ..opts()
            };
            solve(&down(), 0.6, -10.0 * ELL, &o)
        })
        .collect();
    let xs = linspace(a, b, 200);
    let d = |p: &Profile, q: &Profile| {
        xs.iter()
            .map(|&x| (p.eval(x) - q.eval(x)).abs())
            .fold(0.0, f64::max)
    };
    (d(&sol[0], &sol[1]) / d(&sol[1], &sol[2])).log2()
}

#[test]
fn method_of_steps_converges_at_high_order() {
    let p = observed_order(-6.0 * ELL, 0.0);
    assert!(p >= 3.0, "observed order {p}");
}
