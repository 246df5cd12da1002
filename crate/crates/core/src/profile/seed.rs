//! The uniform-road wave `W`, initial data on `x >= 0`, and the backward
//! solve across the jump.

use crate::model::{FluxModel, RoadCondition, SpeedLimit};
use crate::numeric::bisect;

use super::march::Marcher;
use super::{Profile, ProfileError, SolverOptions};

/// How `Q` is prescribed on `x >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialKind {
    /// A horizontal shift of the uniform-road wave for `V+`.
    ShiftedW,
    /// The constant right state.
    Constant,
}

/// Decay rate of the unstable mode of the linearization about `rho2`:
/// the positive root of `lambda = |a| (1 - exp(-lambda s))`.
fn unstable_rate(model: &FluxModel, rho2: f64, ell: f64) -> Option<f64> {
    let a = (rho2 * rho2 * model.phi_prime(rho2) / (ell * model.phi(rho2))).abs();
    let s = ell / rho2;
    if a * s <= 1.0 {
        return None;
    }
    let g = |l: f64| l - a * (1.0 - (-l * s).exp());
    bisect(g, 1e-9 * a, a + 1.0, 1e-14, 200)
}

/// Travelling wave of the uniform road `V`: increasing from the low root to
/// the high root of `f(V, rho) = fbar`, normalized so that `W(0) = rho*`.
pub fn solve_w_profile(
    model: &FluxModel,
    speed: f64,
    fbar: f64,
    ell: f64,
    opts: &SolverOptions,
) -> Result<Profile, ProfileError> {
    let (rho1, rho2) = model.fbar_roots(speed, fbar)?;
    if rho1 >= rho2 || fbar >= model.max_flux(speed)? * (1.0 - 1e-12) {
        return Err(ProfileError::DegenerateCase { fbar });
    }
    let rho_star = model.critical_density()?;
    let h = opts.step(ell);
    let delta = opts.seed_delta;
    let lambda = unstable_rate(model, rho2, ell)
        .ok_or_else(|| ProfileError::SeedFailure(format!("no unstable mode at rho2 = {rho2}")))?;

    // Seed: the unstable mode itself on [x0, x0 + tail].
    let x0 = 60.0 * ell / rho1;
    let n_tail = (opts.tail_spacings * ell / rho2 / h).ceil() as usize + 1;
    let tail: Vec<(f64, f64, f64, f64)> = (0..=n_tail)
        .map(|j| {
            let x = x0 + j as f64 * h;
            let e = delta * (-lambda * (x - x0)).exp();
            (x, rho2 - e, lambda * e, lambda * e)
        })
        .collect();

    let mut marcher = Marcher::new(model, ell, speed, speed, &tail, opts);
    let left_span = opts.tail_spacings * ell / rho1;
    let departure = ((rho2 - rho_star) / delta).ln() / lambda;
    let max_steps = ((x0.max(2.0 * departure) + 2.0 * left_span + 100.0 * ell / rho1) / h) as usize;
    let mut x_cross = None;
    for j in 1..=max_steps {
        marcher
            .advance_to(x0 - j as f64 * h)
            .map_err(|e| ProfileError::SeedFailure(format!("backward march: {e}")))?;
        let (x, q) = marcher.front();
        if x_cross.is_none() && q < rho_star {
            x_cross = Some(x);
        }
        if let Some(xc) = x_cross {
            if x <= xc - left_span {
                break;
            }
        }
    }
    let x_cross = x_cross.ok_or_else(|| {
        ProfileError::SeedFailure(format!(
            "no descent to rho* = {rho_star} within {max_steps} steps"
        ))
    })?;
    let (mut xs, mut ys, mut dl, mut dr) = marcher.into_nodes();
    if xs[0] > x_cross - left_span + 1e-9 {
        return Err(ProfileError::SeedFailure("left tail too short".into()));
    }

    let raw = Profile::from_nodes(
        xs.clone(),
        ys.clone(),
        dl.clone(),
        dr.clone(),
        ell,
        fbar,
        h,
        SpeedLimit::Uniform(speed),
    )
    .map_err(|e| ProfileError::SeedFailure(e.to_string()))?;
    if !raw.is_monotone(1e-10) {
        return Err(ProfileError::SeedFailure(format!(
            "wave is not monotone (min slope {})",
            raw.min_slope()
        )));
    }

    // Normalize: W(x_hat) = rho*, with x_hat stored as an exact node.
    let k = ys.partition_point(|&q| q < rho_star);
    let (a, b) = (xs[k - 1], xs[k]);
    let x_hat = bisect(|x| raw.eval(x) - rho_star, a, b, 1e-15, 200)
        .ok_or_else(|| ProfileError::SeedFailure("rho* not bracketed".into()))?;
    let shift = if x_hat - a < 1e-9 * h {
        a
    } else if b - x_hat < 1e-9 * h {
        b
    } else {
        let q = raw.eval(x_hat);
        let d = w_slope(model, &raw, x_hat, q, ell);
        xs.insert(k, x_hat);
        ys.insert(k, q);
        dl.insert(k, d);
        dr.insert(k, d);
        x_hat
    };
    for x in xs.iter_mut() {
        *x -= shift;
    }
    Profile::from_nodes(xs, ys, dl, dr, ell, fbar, h, SpeedLimit::Uniform(speed))
}

/// Right-hand side of the uniform-road equation read off a computed profile.
fn w_slope(model: &FluxModel, w: &Profile, x: f64, q: f64, ell: f64) -> f64 {
    let phi = model.phi(q);
    q * q / (ell * phi) * (phi - model.phi(w.eval(x + ell / q)))
}

/// Shift `s` with `W(s) = q0`.
pub fn w_shift(w: &Profile, q0: f64) -> Result<f64, ProfileError> {
    let vals = w.values();
    let (lo, hi) = (vals[0], vals[vals.len() - 1]);
    if !(q0 > lo && q0 < hi) {
        return Err(ProfileError::OutOfRange { q0, lo, hi });
    }
    bisect(|x| w.eval(x) - q0, w.x_min(), w.x_max(), 1e-14, 200).ok_or(ProfileError::OutOfRange {
        q0,
        lo,
        hi,
    })
}

/// Data for `Q` on `[0, x_max]`: `x -> W(x + s)` with `W(s) = q0`, or the
/// constant `q0 = rho+`.
pub fn build_initial_data(
    kind: InitialKind,
    w: Option<&Profile>,
    q0: f64,
    model: &FluxModel,
    road: &RoadCondition,
    ell: f64,
    opts: &SolverOptions,
) -> Result<Profile, ProfileError> {
    let h = opts.step(ell);
    let right = SpeedLimit::Uniform(road.v_plus);
    match kind {
        InitialKind::Constant => {
            if !(q0 > 0.0 && q0 < 1.0) {
                return Err(ProfileError::DensityDomain(q0));
            }
            let fbar = model.flux(road.v_plus, q0)?;
            let x_max = opts.tail_spacings * ell / q0;
            Profile::constant(q0, 0.0, x_max, h, ell, fbar, right)
        }
        InitialKind::ShiftedW => {
            let w = w.ok_or_else(|| {
                ProfileError::InvalidInitialData("shifted data needs the wave W".into())
            })?;
            if w.speeds() != right {
                return Err(ProfileError::InvalidInitialData(format!(
                    "wave computed for {:?}, road needs speed {}",
                    w.speeds(),
                    road.v_plus
                )));
            }
            let s = w_shift(w, q0)?;
            let q_start = w.eval(s);
            let d0 = w_slope(model, w, s, q_start, ell);
            let mut xs = vec![0.0];
            let mut ys = vec![q_start];
            let mut dl = vec![d0];
            let mut dr = vec![d0];
            for (k, &x) in w.xs().iter().enumerate() {
                if x - s > 1e-9 * h {
                    xs.push(x - s);
                    ys.push(w.values()[k]);
                    dl.push(w.left_slopes()[k]);
                    dr.push(w.right_slopes()[k]);
                }
            }
            if xs.len() < 2 {
                return Err(ProfileError::InvalidInitialData("wave too short".into()));
            }
            Profile::from_nodes(xs, ys, dl, dr, w.ell(), w.fbar(), h, right)
        }
    }
}

/// Solves for `Q` on `[x_min, 0]` given `init` on `[0, x_max]`.
pub fn solve_q_backward(
    init: &Profile,
    model: &FluxModel,
    road: &RoadCondition,
    ell: f64,
    x_min: f64,
    opts: &SolverOptions,
) -> Result<Profile, ProfileError> {
    if init.x_min().abs() > 1e-12 {
        return Err(ProfileError::InvalidInitialData(format!(
            "initial data starts at {} instead of 0",
            init.x_min()
        )));
    }
    if !(x_min < 0.0) {
        return Err(ProfileError::InvalidInitialData(format!(
            "x_min = {x_min} must be negative"
        )));
    }
    let reach = 2.0 * ell / init.min_value();
    if init.x_max() < reach {
        return Err(ProfileError::InvalidInitialData(format!(
            "initial data ends at {}, need at least {reach}",
            init.x_max()
        )));
    }
    let nodes: Vec<(f64, f64, f64, f64)> = (0..init.xs().len())
        .map(|k| {
            (
                init.xs()[k],
                init.values()[k],
                init.left_slopes()[k],
                init.right_slopes()[k],
            )
        })
        .collect();
    let mut marcher = Marcher::new(model, ell, road.v_minus, road.v_plus, &nodes, opts);
    marcher.start_at_jump()?;
    let h = opts.step(ell);
    let n = (-x_min / h).ceil() as usize;
    for j in 1..=n {
        let target = if j == n { x_min } else { -(j as f64) * h };
        marcher.advance_to(target)?;
    }
    let crossing = marcher.crossings.first().copied();
    let (xs, ys, dl, dr) = marcher.into_nodes();
    Ok(
        Profile::from_nodes(xs, ys, dl, dr, ell, init.fbar(), h, SpeedLimit::Jump(*road))?
            .with_crossing(crossing),
    )
}
