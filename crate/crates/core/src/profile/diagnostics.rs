//! Checks that a computed profile behaves like a stationary profile, and the
//! anchor scan used to certify that none exists.

use rayon::prelude::*;

use crate::model::{CaseReport, FluxModel, RoadCondition, SpeedLimit};
use crate::numeric::{gauss_legendre5, linspace};

use super::{
    build_initial_data, solve_q_backward, solve_w_profile, InitialKind, Profile, ProfileError,
    Side, SolverOptions,
};

/// Number of initial data tried per case by [`scan_anchors`].
pub const ANCHOR_COUNT: usize = 10;
/// Distance kept from the ends of the shifted-wave range.
pub const ANCHOR_NUDGE: f64 = 1e-4;
/// Tolerance on asymptotes and residual when deciding acceptance.
pub const ACCEPT_TOL: f64 = 1e-3;
/// Number of sample points for [`max_periodic_residual`].
pub const RESIDUAL_SAMPLES: usize = 50;

/// One-sided slopes at the jump and at the leader crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransversalityReport {
    pub slope_zero_left: f64,
    pub slope_zero_right: f64,
    /// `y*` with `y* + ell / Q(y*) = 0`.
    pub crossing: f64,
    pub slope_crossing_left: f64,
    pub slope_crossing_right: f64,
    /// Slope of `h(x) = -ell / x` at the crossing.
    pub h_prime: f64,
    /// `|Q'(y*-) - h'(y*) (1 - phi(Q(0)) / phi(h(y*)))|`.
    pub identity_residual: f64,
    pub passes_jump: bool,
    pub passes_crossing: bool,
}

impl TransversalityReport {
    pub fn passes(&self) -> bool {
        self.passes_jump && self.passes_crossing
    }
}

pub fn transversality_report(
    profile: &Profile,
    model: &FluxModel,
    slope_cap: f64,
) -> Result<TransversalityReport, ProfileError> {
    if !matches!(profile.speeds(), SpeedLimit::Jump(_)) {
        return Err(ProfileError::NotApplicable);
    }
    let y = profile.crossing().ok_or(ProfileError::NotApplicable)?;
    let (z_l, z_r) = profile
        .node_slopes(0.0)
        .ok_or(ProfileError::NotApplicable)?;
    let (y_l, y_r) = profile.node_slopes(y).ok_or(ProfileError::NotApplicable)?;
    let ell = profile.ell();
    let h_prime = ell / (y * y);
    let h_y = -ell / y;
    let predicted = h_prime * (1.0 - model.phi(profile.q_at_zero()) / model.phi(h_y));
    let bounded = |d: f64| d.is_finite() && d.abs() < slope_cap;
    Ok(TransversalityReport {
        slope_zero_left: z_l,
        slope_zero_right: z_r,
        crossing: y,
        slope_crossing_left: y_l,
        slope_crossing_right: y_r,
        h_prime,
        identity_residual: (y_l - predicted).abs(),
        passes_jump: bounded(z_l) && bounded(z_r),
        passes_crossing: y_l < h_prime && y_r < h_prime,
    })
}

/// `| int_x^{x#} dz / (k(z) phi(Q(z))) - ell / fbar |`: zero for an exact
/// profile, since every car needs one period to reach its leader's spot.
pub fn periodic_residual(
    profile: &Profile,
    model: &FluxModel,
    x: f64,
) -> Result<f64, ProfileError> {
    let ell = profile.ell();
    let x_sharp = x + ell / profile.eval(x);
    let (lo, hi) = (profile.x_min(), profile.x_max());
    if x < lo || x_sharp > hi {
        return Err(ProfileError::SpanError { x, x_sharp, lo, hi });
    }
    let speeds = profile.speeds();
    let integrand = |z: f64| 1.0 / (speeds.at(z) * model.phi(profile.eval(z)));
    let mut total = 0.0;
    for (a, b) in profile.curve().cells_in(x, x_sharp) {
        match speeds.jump() {
            Some(j) if a < j && j < b => {
                total += gauss_legendre5(integrand, a, j) + gauss_legendre5(integrand, j, b);
            }
            _ => total += gauss_legendre5(integrand, a, b),
        }
    }
    Ok((total - ell / profile.fbar()).abs())
}

/// Largest residual over `n` evenly spaced points whose leader stays on the grid.
/// Returns `(residual, x)`.
pub fn max_periodic_residual(
    profile: &Profile,
    model: &FluxModel,
    n: usize,
) -> Result<(f64, f64), ProfileError> {
    let x_hi = profile.x_max() - profile.ell() / profile.min_value() * (1.0 + 1e-9);
    let mut worst = (0.0, profile.x_min());
    for x in linspace(profile.x_min(), x_hi, n) {
        let r = periodic_residual(profile, model, x)?;
        if r > worst.0 {
            worst = (r, x);
        }
    }
    Ok(worst)
}

/// Largest of `z_{i+1} - y#` and `y# - z_{i+2}` over points `y` sampled in
/// each gap `(z_i, z_{i+1})`. Negative when every leader interleaves.
pub fn interleaving_violation(profile: &Profile, positions: &[f64]) -> f64 {
    let ell = profile.ell();
    let mut worst = f64::NEG_INFINITY;
    for w in positions.windows(3) {
        for j in 1..8 {
            let y = w[0] + (w[1] - w[0]) * j as f64 / 8.0;
            let ys = y + ell / profile.eval(y);
            worst = worst.max(w[1] - ys).max(ys - w[2]);
        }
    }
    worst
}

/// Invariant region on the left: once `f-(Q) > fbar` and `Q > rho-` hold on
/// a whole car spacing `[y, y#]` with `y# <= 0`, they hold at every node
/// further left. Returns the largest violation there, or `None` if no such
/// spacing exists.
pub fn invariant_region_violation(
    profile: &Profile,
    model: &FluxModel,
    rho_minus: f64,
) -> Option<f64> {
    let SpeedLimit::Jump(road) = profile.speeds() else {
        return None;
    };
    let (xs, ys) = (profile.xs(), profile.values());
    let fbar = profile.fbar();
    let ell = profile.ell();
    let inside = |q: f64| model.flux_unchecked(road.v_minus, q) > fbar && q > rho_minus;
    let k0 = xs.partition_point(|&x| x < 0.0);
    let start = (0..k0).rev().find(|&k| {
        let y = xs[k];
        let y_sharp = y + ell / ys[k];
        if y_sharp > 0.0 {
            return false;
        }
        let hi = xs.partition_point(|&x| x <= y_sharp);
        (k..hi).all(|j| inside(ys[j]))
    })?;
    let worst = (0..start)
        .map(|j| {
            let q = ys[j];
            (fbar - model.flux_unchecked(road.v_minus, q)).max(rho_minus - q)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Some(worst)
}

/// Whether `Q` has a strict local maximum inside `[y*, 0]`, read off the
/// sign pattern of consecutive differences.
pub fn has_interior_max_on_first_interval(profile: &Profile) -> Result<bool, ProfileError> {
    let y = profile.crossing().ok_or(ProfileError::NotApplicable)?;
    let (xs, ys) = (profile.xs(), profile.values());
    let mut rising = false;
    for k in 1..xs.len() {
        if xs[k - 1] < y || xs[k] > 0.0 {
            continue;
        }
        let d = ys[k] - ys[k - 1];
        if d > 0.0 {
            rising = true;
        } else if d < 0.0 && rising {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Verdict on one backward solve against the expected asymptotes.
#[derive(Debug, Clone, PartialEq)]
pub enum Assessment {
    Accepted {
        residual: f64,
        left: f64,
        right: f64,
    },
    BlowUp {
        x: f64,
        q: f64,
    },
    ResidualViolation {
        residual: f64,
    },
    BoundaryMismatch {
        side: Side,
        found: f64,
        expected: f64,
    },
    Failed(ProfileError),
}

impl Assessment {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Assessment::Accepted { .. })
    }

    /// Blow-up or periodicity failure: the solve does not describe a profile at all.
    pub fn is_breakdown(&self) -> bool {
        matches!(
            self,
            Assessment::BlowUp { .. } | Assessment::ResidualViolation { .. }
        )
    }
}

/// Classifies a backward-solve result: blow-up, then periodicity residual,
/// then the left and right asymptotes against `(rho_minus, rho_plus)`.
pub fn assess_profile(
    result: &Result<Profile, ProfileError>,
    model: &FluxModel,
    rho_minus: f64,
    rho_plus: f64,
    tol: f64,
) -> Assessment {
    let profile = match result {
        Ok(p) => p,
        Err(ProfileError::BlowUp { x, q, .. }) => return Assessment::BlowUp { x: *x, q: *q },
        Err(e) => return Assessment::Failed(e.clone()),
    };
    let residual = match max_periodic_residual(profile, model, RESIDUAL_SAMPLES) {
        Ok((r, _)) => r,
        Err(e) => return Assessment::Failed(e),
    };
    if residual > tol {
        return Assessment::ResidualViolation { residual };
    }
    let mut ends = [0.0; 2];
    for (slot, (side, expected)) in [(Side::Left, rho_minus), (Side::Right, rho_plus)]
        .into_iter()
        .enumerate()
    {
        let found = match profile.asymptote(side) {
            Ok(a) => a.value,
            Err(e) => return Assessment::Failed(e),
        };
        if (found - expected).abs() > tol {
            return Assessment::BoundaryMismatch {
                side,
                found,
                expected,
            };
        }
        ends[slot] = found;
    }
    Assessment::Accepted {
        residual,
        left: ends[0],
        right: ends[1],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorOutcome {
    pub q0: f64,
    pub kind: InitialKind,
    pub assessment: Assessment,
}

/// Backward solves from `ANCHOR_COUNT` initial data spread over the range
/// `[rho1+, rho2+]` of possible values `Q(0)`.
///
/// The anchor equal to `rho+` uses the constant datum, the others a shifted
/// uniform-road wave (kept `ANCHOR_NUDGE` inside the open range). Every
/// outcome is assessed against the case's `(rho-, rho+)`.
pub fn scan_anchors(
    model: &FluxModel,
    road: &RoadCondition,
    report: &CaseReport,
    ell: f64,
    x_min: f64,
    opts: &SolverOptions,
) -> Vec<AnchorOutcome> {
    let (lo, hi) = (report.rho1_plus, report.rho2_plus);
    let w = solve_w_profile(model, road.v_plus, report.fbar, ell, opts);
    linspace(lo, hi, ANCHOR_COUNT)
        .into_par_iter()
        .map(|a| {
            let (kind, q0) = if (a - report.rho_plus).abs() <= 1e-12 {
                (InitialKind::Constant, report.rho_plus)
            } else {
                (
                    InitialKind::ShiftedW,
                    a.clamp(lo + ANCHOR_NUDGE, hi - ANCHOR_NUDGE),
                )
            };
            let result = match (&w, kind) {
                (Err(e), InitialKind::ShiftedW) => Err(e.clone()),
                _ => build_initial_data(kind, w.as_ref().ok(), q0, model, road, ell, opts)
                    .and_then(|init| solve_q_backward(&init, model, road, ell, x_min, opts)),
            };
            AnchorOutcome {
                q0,
                kind,
                assessment: assess_profile(
                    &result,
                    model,
                    report.rho_minus,
                    report.rho_plus,
                    ACCEPT_TOL,
                ),
            }
        })
        .collect()
}
