//! Vanishing-viscosity comparison: stationary viscous profiles across the
//! jump and a finite-volume solver for the viscous conservation law.

use thiserror::Error;

use crate::model::{FluxModel, ModelError, RoadCondition, SpeedLimit};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ViscousError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("viscous profile leaves [0, 1] at x = {x} (rho = {rho})")]
    BlowUp { x: f64, rho: f64 },
    #[error("density {rho} outside [0, 1] in cell {cell} at t = {time}")]
    Domain { cell: usize, rho: f64, time: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Grid points per side used to look for a witness `rho_hat`.
const EXISTENCE_SCAN: usize = 2000;
/// Samples per interval when checking the sign of `f - fbar`.
const SIGN_SAMPLES: usize = 64;

/// Outcome of [`viscous_existence`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViscousExistence {
    pub fbar: f64,
    /// Whether the profile would increase (`rho- < rho+`).
    pub increasing: bool,
    /// Smallest and largest feasible `rho_hat` found.
    pub feasible: Option<(f64, f64)>,
}

impl ViscousExistence {
    pub fn exists(&self) -> bool {
        self.feasible.is_some()
    }

    /// Midpoint of the feasible set.
    pub fn rho_hat(&self) -> Option<f64> {
        self.feasible.map(|(a, b)| 0.5 * (a + b))
    }
}

/// Whether `sign * (f(v, rho) - fbar) > 0` for `rho` strictly between `a`
/// and `b`, plus at `b`. Empty when `a == b`.
fn one_signed(model: &FluxModel, v: f64, fbar: f64, a: f64, b: f64, sign: f64) -> bool {
    (1..=SIGN_SAMPLES).all(|j| {
        let r = a + (b - a) * j as f64 / SIGN_SAMPLES as f64;
        a == b || sign * (model.flux_unchecked(v, r) - fbar) > 0.0
    })
}

/// Looks for a value `rho_hat = rho(0)` from which a monotone viscous
/// profile connects `rho-` at `-inf` to `rho+` at `+inf`.
///
/// The profile climbs (or falls) through `[rho-, rho_hat]` on `x < 0` and
/// through `[rho_hat, rho+]` on `x > 0`, so `f- - fbar` must carry the sign of
/// the motion on the first range and `f+ - fbar` on the second. The ends
/// `rho-`, `rho+` are equilibria and are excluded.
pub fn viscous_existence(
    model: &FluxModel,
    road: &RoadCondition,
    rho_minus: f64,
    rho_plus: f64,
) -> Result<ViscousExistence, ViscousError> {
    let balance = model.check_rankine_hugoniot(road, rho_minus, rho_plus)?;
    if balance.trivial {
        return Err(ModelError::TrivialState.into());
    }
    let fbar = balance.fbar;
    let increasing = rho_minus < rho_plus;
    let sign = if increasing { 1.0 } else { -1.0 };
    let feasible = (0..=EXISTENCE_SCAN)
        .map(|j| rho_minus + (rho_plus - rho_minus) * j as f64 / EXISTENCE_SCAN as f64)
        .filter(|&r| {
            one_signed(model, road.v_minus, fbar, rho_minus, r, sign)
                && one_signed(model, road.v_plus, fbar, rho_plus, r, sign)
        })
        .fold(None, |acc: Option<(f64, f64)>, r| match acc {
            None => Some((r, r)),
            Some((a, b)) => Some((a.min(r), b.max(r))),
        });
    Ok(ViscousExistence {
        fbar,
        increasing,
        feasible,
    })
}

/// Solution of `eps rho' = f(k(x), rho) - fbar` on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ViscousProfile {
    xs: Vec<f64>,
    values: Vec<f64>,
    epsilon: f64,
    fbar: f64,
    anchor: f64,
    road: RoadCondition,
}

/// Output grid spacing in units of `epsilon`.
const OUTPUT_SPACING: f64 = 1e-3;
/// Local error target of the step-doubling control.
const STEP_TOL: f64 = 1e-12;

/// Default half-width of the grid: `40 eps / c_hat0`.
pub fn default_span(model: &FluxModel, epsilon: f64) -> f64 {
    40.0 * epsilon / model.c_hat0()
}

/// Integrates the viscous profile ODE from `rho(0) = rho_at_zero` forward on
/// `[0, xspan]` with `V+` and backward on `[-xspan, 0]` with `V-`.
pub fn stationary_profile(
    model: &FluxModel,
    road: &RoadCondition,
    epsilon: f64,
    fbar: f64,
    rho_at_zero: f64,
    xspan: f64,
) -> Result<ViscousProfile, ViscousError> {
    if !(epsilon > 0.0 && xspan > 0.0) {
        return Err(ViscousError::InvalidInput(format!(
            "epsilon = {epsilon} and xspan = {xspan} must be positive"
        )));
    }
    if !(rho_at_zero > 0.0 && rho_at_zero < 1.0) {
        return Err(ModelError::DensityDomain(rho_at_zero).into());
    }
    let dx = OUTPUT_SPACING * epsilon;
    let n = (xspan / dx).ceil() as usize;
    let dx = xspan / n as f64;
    let right = integrate_half(model, road.v_plus, epsilon, fbar, rho_at_zero, dx, n)?;
    let left = integrate_half(model, road.v_minus, epsilon, fbar, rho_at_zero, -dx, n)?;
    let mut xs = Vec::with_capacity(2 * n + 1);
    let mut values = Vec::with_capacity(2 * n + 1);
    for j in (1..=n).rev() {
        xs.push(-(j as f64) * dx);
        values.push(left[j]);
    }
    for (j, &v) in right.iter().enumerate() {
        xs.push(j as f64 * dx);
        values.push(v);
    }
    Ok(ViscousProfile {
        xs,
        values,
        epsilon,
        fbar,
        anchor: rho_at_zero,
        road: *road,
    })
}

/// `n` output steps of signed length `dx` with speed `v`, each covered by
/// RK4 substeps whose size is controlled by step doubling.
fn integrate_half(
    model: &FluxModel,
    v: f64,
    epsilon: f64,
    fbar: f64,
    rho0: f64,
    dx: f64,
    n: usize,
) -> Result<Vec<f64>, ViscousError> {
    let rhs = |r: f64| (model.flux_unchecked(v, r) - fbar) / epsilon;
    let rk4 = |r: f64, h: f64| {
        let k1 = rhs(r);
        let k2 = rhs(r + 0.5 * h * k1);
        let k3 = rhs(r + 0.5 * h * k2);
        let k4 = rhs(r + h * k3);
        r + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    };
    let mut out = Vec::with_capacity(n + 1);
    out.push(rho0);
    let mut r = rho0;
    let mut h = dx;
    for j in 1..=n {
        let x_end = j as f64 * dx;
        let mut x = (j - 1) as f64 * dx;
        while (x_end - x) * dx.signum() > 0.0 {
            if h.abs() > (x_end - x).abs() {
                h = x_end - x;
            }
            let full = rk4(r, h);
            let half = rk4(rk4(r, 0.5 * h), 0.5 * h);
            let err = (half - full).abs() / 15.0;
            if err > STEP_TOL && h.abs() > 1e-6 * dx.abs() {
                h *= 0.5;
                continue;
            }
            r = half + (half - full) / 15.0;
            x += h;
            if !(0.0..=1.0).contains(&r) || !r.is_finite() {
                return Err(ViscousError::BlowUp { x, rho: r });
            }
            if err < STEP_TOL / 64.0 {
                h *= 2.0;
            }
        }
        out.push(r);
    }
    Ok(out)
}

impl ViscousProfile {
    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn fbar(&self) -> f64 {
        self.fbar
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn road(&self) -> RoadCondition {
        self.road
    }

    /// Piecewise-linear interpolant, constant beyond the grid.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.values[0];
        }
        if x >= self.xs[n - 1] {
            return self.values[n - 1];
        }
        let k = self.xs.partition_point(|&s| s <= x).min(n - 1);
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        let t = (x - x0) / (x1 - x0);
        self.values[k - 1] + t * (self.values[k] - self.values[k - 1])
    }

    /// Values at the two ends of the grid.
    pub fn limits(&self) -> (f64, f64) {
        (self.values[0], self.values[self.values.len() - 1])
    }

    /// Whether consecutive differences never take both signs beyond `tol`.
    pub fn is_monotone(&self, tol: f64) -> bool {
        let d = self.values.windows(2).map(|w| w[1] - w[0]);
        let up = d.clone().all(|s| s >= -tol);
        let down = d.into_iter().all(|s| s <= tol);
        up || down
    }

    /// Largest `|centered difference - rhs|` over interior nodes, skipping
    /// the node at the jump.
    pub fn max_residual(&self, model: &FluxModel) -> f64 {
        let speeds = SpeedLimit::Jump(self.road);
        let mut worst: f64 = 0.0;
        for j in 1..self.xs.len() - 1 {
            if self.xs[j - 1] < 0.0 && self.xs[j + 1] > 0.0 {
                continue;
            }
            let x = self.xs[j];
            let d = (self.values[j + 1] - self.values[j - 1]) / (self.xs[j + 1] - self.xs[j - 1]);
            let rhs =
                (model.flux_unchecked(speeds.at(x), self.values[j]) - self.fbar) / self.epsilon;
            worst = worst.max((d - rhs).abs());
        }
        worst
    }
}

/// Cell averages of the viscous conservation law at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeState {
    /// Cell centers, uniform spacing.
    pub x: Vec<f64>,
    pub rho: Vec<f64>,
    pub epsilon: f64,
    pub time: f64,
}

impl PdeState {
    /// `n` cells covering `[x_lo, x_hi]` filled by `init(x_center)`.
    pub fn from_fn(
        x_lo: f64,
        x_hi: f64,
        n: usize,
        epsilon: f64,
        init: impl Fn(f64) -> f64,
    ) -> Result<Self, ViscousError> {
        if !(x_hi > x_lo) || n < 2 || !(epsilon > 0.0) {
            return Err(ViscousError::InvalidInput(format!(
                "grid [{x_lo}, {x_hi}] with {n} cells and epsilon = {epsilon}"
            )));
        }
        let dx = (x_hi - x_lo) / n as f64;
        let x: Vec<f64> = (0..n).map(|j| x_lo + (j as f64 + 0.5) * dx).collect();
        let rho = x.iter().map(|&s| init(s)).collect();
        let state = PdeState {
            x,
            rho,
            epsilon,
            time: 0.0,
        };
        state.check_domain()?;
        Ok(state)
    }

    /// Riemann data `rho_l` for `x < 0`, `rho_r` for `x > 0`.
    pub fn riemann(
        rho_l: f64,
        rho_r: f64,
        x_lo: f64,
        x_hi: f64,
        n: usize,
        epsilon: f64,
    ) -> Result<Self, ViscousError> {
        Self::from_fn(
            x_lo,
            x_hi,
            n,
            epsilon,
            |x| if x < 0.0 { rho_l } else { rho_r },
        )
    }

    pub fn dx(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    pub fn mass(&self) -> f64 {
        self.rho.iter().sum::<f64>() * self.dx()
    }

    /// Sum of `|rho_{j+1} - rho_j|` over cells with centers in `(a, b)`.
    pub fn total_variation(&self, a: f64, b: f64) -> f64 {
        let mut tv = 0.0;
        for j in 1..self.x.len() {
            if self.x[j - 1] > a && self.x[j] < b {
                tv += (self.rho[j] - self.rho[j - 1]).abs();
            }
        }
        tv
    }

    /// Linear interpolation between cell centers.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.x.len();
        let s = ((x - self.x[0]) / self.dx()).clamp(0.0, (n - 1) as f64);
        let k = (s.floor() as usize).min(n - 2);
        let t = s - k as f64;
        self.rho[k] + t * (self.rho[k + 1] - self.rho[k])
    }

    fn check_domain(&self) -> Result<(), ViscousError> {
        match self.rho.iter().position(|r| !(0.0..=1.0).contains(r)) {
            Some(cell) => Err(ViscousError::Domain {
                cell,
                rho: self.rho[cell],
                time: self.time,
            }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeOptions {
    /// Fraction of the stable step taken.
    pub cfl: f64,
    /// Interval between recorded states; `None` keeps only the ends.
    pub record_interval: Option<f64>,
}

impl Default for PdeOptions {
    fn default() -> Self {
        Self {
            cfl: 0.4,
            record_interval: None,
        }
    }
}

/// Recorded states and per-step diagnostics of a [`pde_solve`] run.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeRun {
    pub states: Vec<PdeState>,
    pub steps: usize,
    /// Largest `|mass change + dt (flux out - flux in)|` over all steps.
    pub max_conservation_error: f64,
    /// Largest distance by which any value left the initial range.
    pub max_range_excursion: f64,
}

/// Explicit finite-volume solve of `rho_t + f(k(x), rho)_x = eps rho_xx` up
/// to time `t_end`.
///
/// Convection uses the local Lax-Friedrichs flux with each cell's own speed
/// limit, so the interface at `x = 0` pairs `V-` on the left with `V+` on
/// the right. Ghost cells hold the initial end states.
pub fn pde_solve(
    init: &PdeState,
    model: &FluxModel,
    speeds: SpeedLimit,
    t_end: f64,
    opts: &PdeOptions,
) -> Result<PdeRun, ViscousError> {
    if !(t_end >= 0.0) || !(opts.cfl > 0.0 && opts.cfl <= 1.0) {
        return Err(ViscousError::InvalidInput(format!(
            "t_end = {t_end}, cfl = {}",
            opts.cfl
        )));
    }
    init.check_domain()?;
    let n = init.x.len();
    let dx = init.dx();
    let eps = init.epsilon;
    // Cell speed limits with ghosts at both ends.
    let k: Vec<f64> = std::iter::once(speeds.at(init.x[0] - dx))
        .chain(init.x.iter().map(|&x| speeds.at(x)))
        .chain(std::iter::once(speeds.at(init.x[n - 1] + dx)))
        .collect();
    let (ghost_l, ghost_r) = (init.rho[0], init.rho[n - 1]);
    let lo = init.rho.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = init.rho.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut state = init.clone();
    let mut states = vec![init.clone()];
    let mut next_record = opts.record_interval.map(|r| r.min(t_end));
    let mut ext = vec![0.0; n + 2];
    let mut flux = vec![0.0; n + 1];
    let mut steps = 0;
    let mut max_err: f64 = 0.0;
    let mut excursion: f64 = 0.0;
    while state.time < t_end {
        ext[0] = ghost_l;
        ext[1..=n].copy_from_slice(&state.rho);
        ext[n + 1] = ghost_r;
        let alpha_max = (0..n + 2)
            .map(|j| model.flux_derivative(k[j], ext[j]).abs())
            .fold(0.0, f64::max);
        let mut dt = opts.cfl * (dx / alpha_max.max(1e-300)).min(dx * dx / (2.0 * eps));
        let target = next_record.unwrap_or(t_end);
        if state.time + dt >= target {
            dt = target - state.time;
        }
        for (i, g) in flux.iter_mut().enumerate() {
            let (a, b) = (ext[i], ext[i + 1]);
            let (fa, fb) = (
                model.flux_unchecked(k[i], a),
                model.flux_unchecked(k[i + 1], b),
            );
            let alpha = model
                .flux_derivative(k[i], a)
                .abs()
                .max(model.flux_derivative(k[i + 1], b).abs());
            *g = 0.5 * (fa + fb) - 0.5 * alpha * (b - a) - eps * (b - a) / dx;
        }
        let mass_before = state.mass();
        for j in 0..n {
            state.rho[j] -= dt / dx * (flux[j + 1] - flux[j]);
        }
        state.time = if state.time + dt >= target {
            target
        } else {
            state.time + dt
        };
        steps += 1;
        let err = (state.mass() - mass_before + dt * (flux[n] - flux[0])).abs();
        max_err = max_err.max(err);
        for &r in &state.rho {
            excursion = excursion.max(lo - r).max(r - hi);
        }
        state.check_domain()?;
        if state.time == target {
            if let (Some(t), Some(step)) = (next_record, opts.record_interval) {
                states.push(state.clone());
                next_record = (t < t_end).then(|| (t + step).min(t_end));
            }
        }
    }
    if states.last().map(|s| s.time) != Some(state.time) {
        states.push(state);
    }
    Ok(PdeRun {
        states,
        steps,
        max_conservation_error: max_err,
        max_range_excursion: excursion,
    })
}

/// Middle state selected at the jump by Riemann data `(rho_l, rho_r)` with
/// `rho_r` on the congested side: the high root of `f-(rho) = f+(rho_r)`.
pub fn middle_state(
    model: &FluxModel,
    road: &RoadCondition,
    rho_r: f64,
) -> Result<f64, ModelError> {
    let fbar = model.flux(road.v_plus, rho_r)?;
    Ok(model.fbar_roots(road.v_minus, fbar)?.1)
}

/// Rankine-Hugoniot speed of a shock from `rho_l` to `rho_m` under `V-`.
pub fn shock_speed(model: &FluxModel, v: f64, rho_l: f64, rho_m: f64) -> Result<f64, ModelError> {
    Ok((model.flux(v, rho_m)? - model.flux(v, rho_l)?) / (rho_m - rho_l))
}
