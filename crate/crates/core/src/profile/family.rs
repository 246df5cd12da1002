//! Families of profiles parametrized by `Q(0)` and the label map `Psi`.

use rayon::prelude::*;

use crate::model::{FluxModel, RoadCondition};

use super::{
    build_initial_data, solve_q_backward, solve_w_profile, InitialKind, Profile, ProfileError,
    SolverOptions,
};

/// Absolute tolerance on the band edges in [`ProfileFamily::psi`].
pub const PSI_SLACK: f64 = 1e-10;
/// Smallest gap between bracketing members for which [`ProfileFamily::psi`]
/// is defined.
pub const PSI_RESOLUTION: f64 = 1e-8;

/// Profiles for one jump `(rho-, rho+)`, sorted by `Q(0)`.
#[derive(Debug, Clone)]
pub struct ProfileFamily {
    q0s: Vec<f64>,
    members: Vec<Profile>,
    road: RoadCondition,
    ell: f64,
    fbar: f64,
}

/// Solves one profile per entry of `q0_grid`, in parallel.
///
/// `q0` equal to a root of `f+ = fbar` uses the constant datum, every other
/// value a shifted uniform-road wave.
pub fn build_family(
    model: &FluxModel,
    road: &RoadCondition,
    ell: f64,
    fbar: f64,
    q0_grid: &[f64],
    x_min: f64,
    opts: &SolverOptions,
) -> Result<ProfileFamily, ProfileError> {
    let (r1, r2) = model.fbar_roots(road.v_plus, fbar)?;
    let w = solve_w_profile(model, road.v_plus, fbar, ell, opts)?;
    let mut solved: Vec<(f64, Profile)> = q0_grid
        .par_iter()
        .map(|&q0| {
            let kind = if (q0 - r1).abs() <= 1e-12 || (q0 - r2).abs() <= 1e-12 {
                InitialKind::Constant
            } else {
                InitialKind::ShiftedW
            };
            build_initial_data(kind, Some(&w), q0, model, road, ell, opts)
                .and_then(|init| solve_q_backward(&init, model, road, ell, x_min, opts))
                .map(|p| (q0, p))
                .map_err(|e| ProfileError::Member {
                    q0,
                    source: Box::new(e),
                })
        })
        .collect::<Result<_, _>>()?;
    solved.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (q0s, members) = solved.into_iter().unzip();
    Ok(ProfileFamily {
        q0s,
        members,
        road: *road,
        ell,
        fbar,
    })
}

impl ProfileFamily {
    pub fn members(&self) -> &[Profile] {
        &self.members
    }

    pub fn q0s(&self) -> &[f64] {
        &self.q0s
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn road(&self) -> RoadCondition {
        self.road
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn fbar(&self) -> f64 {
        self.fbar
    }

    /// Lowest member, standing in for the lower edge of the basin.
    pub fn lower(&self) -> &Profile {
        &self.members[0]
    }

    /// Highest member, the upper edge of the basin.
    pub fn upper(&self) -> &Profile {
        &self.members[self.members.len() - 1]
    }

    /// `max - min` of the member values at `x`.
    pub fn band_width(&self, x: f64) -> f64 {
        let (lo, hi) = self
            .members
            .iter()
            .map(|m| m.eval(x))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        hi - lo
    }

    /// Interval on which every member is defined.
    pub fn common_span(&self) -> (f64, f64) {
        let lo = self
            .members
            .iter()
            .map(Profile::x_min)
            .fold(f64::MIN, f64::max);
        let hi = self
            .members
            .iter()
            .map(Profile::x_max)
            .fold(f64::MAX, f64::min);
        (lo, hi)
    }

    /// Smallest `Q_{k+1}(x) - Q_k(x)` between neighbouring members over a
    /// uniform grid of step `h` on `[x_lo, x_hi]`. Negative if two cross.
    ///
    /// Pairs closer than `PSI_RESOLUTION` are skipped: in the tails the
    /// members converge to a common limit and their order there is noise.
    pub fn min_gap(&self, x_lo: f64, x_hi: f64, h: f64) -> f64 {
        let n = ((x_hi - x_lo) / h).ceil().max(1.0) as usize;
        let mut gap = f64::INFINITY;
        for j in 0..=n {
            let x = (x_lo + j as f64 * h).min(x_hi);
            for pair in self.members.windows(2) {
                let d = pair[1].eval(x) - pair[0].eval(x);
                if d.abs() >= PSI_RESOLUTION {
                    gap = gap.min(d);
                }
            }
        }
        gap
    }

    /// `Q(0)` of the member through `(x, y)`, interpolated linearly in `y`
    /// between the two members bracketing it.
    ///
    /// Points within `PSI_SLACK` of the band edges count as on the edge. If
    /// the bracketing members are closer than `PSI_RESOLUTION` they cannot be
    /// told apart and the label is reported as unresolved.
    pub fn psi(&self, x: f64, y: f64) -> Result<f64, ProfileError> {
        let n = self.members.len();
        let vals: Vec<f64> = self.members.iter().map(|m| m.eval(x)).collect();
        // Far out in the tails the members agree to roundoff and may swap order.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        let (Some(&first), Some(&last)) = (order.first(), order.last()) else {
            return Err(ProfileError::OutsideD { x, y });
        };
        let (lo, hi) = (vals[first], vals[last]);
        if y < lo - PSI_SLACK || y > hi + PSI_SLACK {
            return Err(ProfileError::OutsideD { x, y });
        }
        if n == 1 {
            return Ok(self.q0s[0]);
        }
        let y = y.clamp(lo, hi);
        let k = order[..n - 1]
            .iter()
            .rposition(|&i| vals[i] <= y)
            .unwrap_or(0);
        let (i, j) = (order[k], order[k + 1]);
        let width = vals[j] - vals[i];
        if width < PSI_RESOLUTION {
            return Err(ProfileError::Unresolved { x, width });
        }
        let t = (y - vals[i]) / width;
        Ok(self.q0s[i] + t * (self.q0s[j] - self.q0s[i]))
    }
}
