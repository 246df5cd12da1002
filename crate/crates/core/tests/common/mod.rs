#![allow(dead_code)]

use ftl_core::model::{FluxModel, RoadCondition};
use ftl_core::profile::{
    build_initial_data, solve_q_backward, solve_w_profile, InitialKind, Profile, SolverOptions,
};

pub const ELL: f64 = 0.2;
pub const FBAR: f64 = 0.1875;

pub fn lw() -> FluxModel {
    FluxModel::lighthill_whitham()
}

/// `V- = 2, V+ = 1`.
pub fn down() -> RoadCondition {
    RoadCondition::new(2.0, 1.0).unwrap()
}

/// `V- = 1, V+ = 2`.
pub fn up() -> RoadCondition {
    RoadCondition::new(1.0, 2.0).unwrap()
}

/// Closed-form roots of `v rho (1 - rho) = f`.
pub fn lw_roots(v: f64, f: f64) -> (f64, f64) {
    let d = (0.25 - f / v).sqrt();
    (0.5 - d, 0.5 + d)
}

/// Backward solve from a shifted wave (or the constant datum at `rho+`).
pub fn solve(road: &RoadCondition, q0: f64, x_min: f64, opts: &SolverOptions) -> Profile {
    let model = lw();
    let (_, rho_plus_hi) = lw_roots(road.v_plus, FBAR);
    let (rho_plus_lo, _) = lw_roots(road.v_plus, FBAR);
    let kind = if (q0 - rho_plus_hi).abs() < 1e-12 || (q0 - rho_plus_lo).abs() < 1e-12 {
        InitialKind::Constant
    } else {
        InitialKind::ShiftedW
    };
    let w = solve_w_profile(&model, road.v_plus, FBAR, ELL, opts).unwrap();
    let init = build_initial_data(kind, Some(&w), q0, &model, road, ELL, opts).unwrap();
    solve_q_backward(&init, &model, road, ELL, x_min, opts).unwrap()
}
