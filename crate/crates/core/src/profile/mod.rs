//! Stationary profiles `Q(x)` of the follow-the-leader model.
//!
//! A profile is a density graph along which every car travels: if car `i`
//! sits at `z_i` then its leader sits at `z_i + ell / Q(z_i)`. Such graphs
//! solve a delay equation in `x` whose delay points to the right, so they
//! are computed by marching backward from data given on `x >= 0`.

mod diagnostics;
mod family;
mod march;
mod seed;

use std::fmt;

use thiserror::Error;

use crate::interp::MonotoneCubic;
use crate::model::{CaseLabel, ModelError, SpeedLimit};
use crate::numeric::{bisect, gauss_legendre5};

pub use diagnostics::{
    assess_profile, has_interior_max_on_first_interval, interleaving_violation,
    invariant_region_violation, max_periodic_residual, periodic_residual, scan_anchors,
    transversality_report, AnchorOutcome, Assessment, TransversalityReport, ACCEPT_TOL,
    ANCHOR_COUNT, ANCHOR_NUDGE, RESIDUAL_SAMPLES,
};
pub use family::{build_family, ProfileFamily, PSI_RESOLUTION, PSI_SLACK};
pub use seed::{build_initial_data, solve_q_backward, solve_w_profile, w_shift, InitialKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("density {0} outside (0, 1)")]
    DensityDomain(f64),
    #[error("flux level {fbar} equals the maximum flux; the wave degenerates to a constant")]
    DegenerateCase { fbar: f64 },
    #[error("seeding the uniform-road wave failed: {0}")]
    SeedFailure(String),
    #[error("Q(0) = {q0} outside ({lo}, {hi})")]
    OutOfRange { q0: f64, lo: f64, hi: f64 },
    #[error("solution blows up near x = {x} (Q = {q}, Q' = {slope})")]
    BlowUp { x: f64, q: f64, slope: f64 },
    #[error("delayed argument {x} lies in the uncomputed region")]
    StepRejected { x: f64 },
    #[error("invalid initial data: {0}")]
    InvalidInitialData(String),
    #[error("profile never crosses the curve x + ell / Q(x) = 0")]
    NotApplicable,
    #[error("[{x}, {x_sharp}] leaves the profile span [{lo}, {hi}]")]
    SpanError {
        x: f64,
        x_sharp: f64,
        lo: f64,
        hi: f64,
    },
    #[error("position recursion left the profile span at index {index}")]
    RangeExhausted { index: i64 },
    #[error("{side} span {span} is shorter than {required}")]
    SpanTooShort {
        side: Side,
        span: f64,
        required: f64,
    },
    #[error("({x}, {y}) lies outside the band of the family")]
    OutsideD { x: f64, y: f64 },
    #[error("members bracketing x = {x} differ by only {width}")]
    Unresolved { x: f64, width: f64 },
    #[error("family member with Q(0) = {q0} failed: {source}")]
    Member { q0: f64, source: Box<ProfileError> },
}

/// Numerical settings shared by the profile solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Grid steps per car length; `h = ell / steps_per_length`.
    pub steps_per_length: usize,
    /// Distance from 0 and 1 at which a solution counts as blown up.
    pub eps_q: f64,
    pub slope_cap: f64,
    /// Accuracy of breakpoint and crossing localization.
    pub crossing_tol: f64,
    /// Highest smoothness order of breakpoints that are tracked.
    pub max_breakpoint_order: u8,
    /// Amplitude of the unstable mode used to seed the uniform-road wave.
    pub seed_delta: f64,
    /// Car spacings kept beyond the transition on either side.
    pub tail_spacings: f64,
    /// Tolerance of the periodicity residual for an accepted profile.
    pub residual_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            steps_per_length: 64,
            eps_q: 1e-9,
            slope_cap: 1e6,
            crossing_tol: 1e-12,
            max_breakpoint_order: 4,
            seed_delta: 1e-6,
            tail_spacings: 45.0,
            residual_tol: 1e-6,
        }
    }
}

impl SolverOptions {
    pub fn step(&self, ell: f64) -> f64 {
        ell / self.steps_per_length as f64
    }
}

/// Limit estimate over the outermost car spacing of one side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Asymptote {
    pub value: f64,
    /// `max - min` over the same interval.
    pub band: f64,
}

/// A sampled profile with its interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    curve: MonotoneCubic,
    ell: f64,
    fbar: f64,
    h: f64,
    speeds: SpeedLimit,
    case_label: Option<CaseLabel>,
    crossing: Option<f64>,
}

impl Profile {
    /// Builds a profile from nodes with one-sided slopes.
    ///
    /// Fails if a value leaves `(0, 1)`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_nodes(
        xs: Vec<f64>,
        ys: Vec<f64>,
        dl: Vec<f64>,
        dr: Vec<f64>,
        ell: f64,
        fbar: f64,
        h: f64,
        speeds: SpeedLimit,
    ) -> Result<Self, ProfileError> {
        if let Some(&bad) = ys.iter().find(|&&q| !(q > 0.0 && q < 1.0)) {
            return Err(ProfileError::DensityDomain(bad));
        }
        Ok(Profile {
            curve: MonotoneCubic::new(xs, ys, dl, dr),
            ell,
            fbar,
            h,
            speeds,
            case_label: None,
            crossing: None,
        })
    }

    /// Builds a profile from samples alone; slopes are estimated.
    pub fn from_samples(
        xs: Vec<f64>,
        ys: Vec<f64>,
        ell: f64,
        fbar: f64,
        speeds: SpeedLimit,
    ) -> Result<Self, ProfileError> {
        let h = if xs.len() > 1 { xs[1] - xs[0] } else { 0.0 };
        let d = crate::interp::estimate_slopes(&xs, &ys);
        Self::from_nodes(xs, ys, d.clone(), d, ell, fbar, h, speeds)
    }

    /// The constant profile `value` on `[x_lo, x_hi]` with step `h`.
    pub fn constant(
        value: f64,
        x_lo: f64,
        x_hi: f64,
        h: f64,
        ell: f64,
        fbar: f64,
        speeds: SpeedLimit,
    ) -> Result<Self, ProfileError> {
        let n = ((x_hi - x_lo) / h).ceil().max(1.0) as usize;
        let xs: Vec<f64> = (0..=n)
            .map(|j| if j == n { x_hi } else { x_lo + j as f64 * h })
            .collect();
        let m = xs.len();
        Self::from_nodes(
            xs,
            vec![value; m],
            vec![0.0; m],
            vec![0.0; m],
            ell,
            fbar,
            h,
            speeds,
        )
    }

    pub fn with_case_label(mut self, label: CaseLabel) -> Self {
        self.case_label = Some(label);
        self
    }

    pub(crate) fn with_crossing(mut self, crossing: Option<f64>) -> Self {
        self.crossing = crossing;
        self
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.curve.eval(x)
    }

    /// Right derivative of the interpolant.
    pub fn derivative(&self, x: f64) -> f64 {
        self.curve.derivative(x)
    }

    /// Stored `(Q'(x-), Q'(x+))` if `x` is a grid node.
    pub fn node_slopes(&self, x: f64) -> Option<(f64, f64)> {
        let xs = self.curve.xs();
        let k = xs.partition_point(|&v| v < x);
        (k < xs.len() && xs[k] == x)
            .then(|| (self.curve.left_slopes()[k], self.curve.right_slopes()[k]))
    }

    pub fn xs(&self) -> &[f64] {
        self.curve.xs()
    }

    pub fn values(&self) -> &[f64] {
        self.curve.ys()
    }

    pub fn left_slopes(&self) -> &[f64] {
        self.curve.left_slopes()
    }

    pub fn right_slopes(&self) -> &[f64] {
        self.curve.right_slopes()
    }

    pub fn curve(&self) -> &MonotoneCubic {
        &self.curve
    }

    pub fn x_min(&self) -> f64 {
        self.curve.x_min()
    }

    pub fn x_max(&self) -> f64 {
        self.curve.x_max()
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn fbar(&self) -> f64 {
        self.fbar
    }

    /// Nominal grid step.
    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn speeds(&self) -> SpeedLimit {
        self.speeds
    }

    pub fn case_label(&self) -> Option<CaseLabel> {
        self.case_label
    }

    pub fn q_at_zero(&self) -> f64 {
        self.eval(0.0)
    }

    /// Where the leader of a car crosses the jump: `y + ell / Q(y) = 0`.
    pub fn crossing(&self) -> Option<f64> {
        self.crossing
    }

    pub fn min_value(&self) -> f64 {
        self.values().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values()
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest divided difference between consecutive nodes.
    pub fn min_slope(&self) -> f64 {
        let (xs, ys) = (self.xs(), self.values());
        (1..xs.len())
            .map(|k| (ys[k] - ys[k - 1]) / (xs[k] - xs[k - 1]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_monotone(&self, tol: f64) -> bool {
        self.min_slope() >= -tol
    }

    pub fn asymptote(&self, side: Side) -> Result<Asymptote, ProfileError> {
        asymptote(self, side)
    }

    /// Pointwise copy with `f` applied to the values; slopes are re-estimated.
    pub fn map_values(&self, f: impl Fn(f64, f64) -> f64) -> Result<Profile, ProfileError> {
        let xs = self.xs().to_vec();
        let ys = xs
            .iter()
            .zip(self.values())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let mut p = Profile::from_samples(xs, ys, self.ell, self.fbar, self.speeds)?;
        p.h = self.h;
        p.case_label = self.case_label;
        p.crossing = self.crossing;
        Ok(p)
    }
}

/// Position of the leader of a car at `x` on the graph: `x + ell / q`.
pub fn leader_position(x: f64, q: f64, ell: f64) -> Result<f64, ProfileError> {
    if !(q > 0.0 && q < 1.0) {
        return Err(ProfileError::DensityDomain(q));
    }
    Ok(x + ell / q)
}

/// Minimum span, in car lengths, required on a side before its limit is estimated.
pub const MIN_ASYMPTOTE_SPAN: f64 = 10.0;

/// Mean and oscillation of `Q` over the outermost car spacing of `side`.
pub fn asymptote(profile: &Profile, side: Side) -> Result<Asymptote, ProfileError> {
    let ell = profile.ell;
    let (span, a, b) = match side {
        Side::Left => {
            let a = profile.x_min();
            (-a, a, a + ell / profile.eval(a))
        }
        Side::Right => {
            let b = profile.x_max();
            (b, b - ell / profile.eval(b), b)
        }
    };
    let required = MIN_ASYMPTOTE_SPAN * ell;
    if span < required {
        return Err(ProfileError::SpanTooShort {
            side,
            span,
            required,
        });
    }
    let cells = profile.curve.cells_in(a, b);
    let integral: f64 = cells
        .iter()
        .map(|&(lo, hi)| gauss_legendre5(|x| profile.eval(x), lo, hi))
        .sum();
    let mut lo = profile.eval(a).min(profile.eval(b));
    let mut hi = profile.eval(a).max(profile.eval(b));
    for (&x, &y) in profile.xs().iter().zip(profile.values()) {
        if x > a && x < b {
            lo = lo.min(y);
            hi = hi.max(y);
        }
    }
    Ok(Asymptote {
        value: integral / (b - a),
        band: hi - lo,
    })
}

/// Car positions generated by the profile: `z_{i+1} = z_i + ell / Q(z_i)`,
/// with `z_0 = z0`. Returned in increasing order, `z0` at index `n_back`.
pub fn generate_positions(
    profile: &Profile,
    z0: f64,
    n_back: usize,
    n_fwd: usize,
) -> Result<Vec<f64>, ProfileError> {
    let ell = profile.ell;
    let (lo, hi) = (profile.x_min(), profile.x_max());
    if z0 < lo || z0 > hi {
        return Err(ProfileError::RangeExhausted { index: 0 });
    }
    let mut fwd = Vec::with_capacity(n_fwd);
    let mut z = z0;
    for i in 1..=n_fwd {
        z += ell / profile.eval(z);
        if z > hi {
            return Err(ProfileError::RangeExhausted { index: i as i64 });
        }
        fwd.push(z);
    }
    let q_floor = profile.min_value();
    let mut back = Vec::with_capacity(n_back);
    let mut next = z0;
    for i in 1..=n_back {
        // The preimage lies within one spacing to the left of `next`.
        let g = |y: f64| y + ell / profile.eval(y) - next;
        let a = next - ell / q_floor * (1.0 + 1e-9);
        let b = next - ell;
        let y = bisect(g, a, b, 1e-15, 200)
            .filter(|&y| y >= lo && g(y).abs() <= 1e-12)
            .ok_or(ProfileError::RangeExhausted { index: -(i as i64) })?;
        back.push(y);
        next = y;
    }
    back.reverse();
    back.push(z0);
    back.extend(fwd);
    Ok(back)
}
