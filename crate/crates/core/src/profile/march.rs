//! Backward method of steps for the delay equation
//!
//! ```text
//! Q'(x) = Q^2 / (ell k(x) phi(Q)) * [k(x) phi(Q) - k(x#) phi(Q(x#))],  x# = x + ell/Q(x)
//! ```
//!
//! The delayed argument always lies more than one car length to the right,
//! so marching in decreasing `x` only ever reads values that are already
//! known. Nodes are kept in decreasing order while marching; delayed values
//! come from cubic Hermite interpolation of the stored nodes and their exact
//! one-sided slopes.
//!
//! The right-hand side loses smoothness where `x#` meets a kink of `Q`
//! (the jump of `k` at 0 first, then its images). Those points are located
//! by bisection on the step length and inserted as extra nodes, so every
//! RK4 step integrates a smooth field.

use crate::interp::{hermite, limit_slopes};
use crate::model::FluxModel;
use crate::numeric::bisect;

use super::{ProfileError, SolverOptions};

/// Which speed limit the delayed term sees during one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Branch {
    /// `x#` on the same side of the jump as `x`.
    Pure,
    /// `x < 0 <= x#`.
    Mixed,
}

impl Branch {
    fn flipped(self) -> Self {
        match self {
            Branch::Pure => Branch::Mixed,
            Branch::Mixed => Branch::Pure,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Kink {
    x: f64,
    order: u8,
    /// The jump of `k`; crossing its image switches the branch.
    jump: bool,
}

pub(crate) struct Marcher<'a> {
    model: &'a FluxModel,
    ell: f64,
    /// `k` at the marching position.
    k_here: f64,
    /// `k(x#)` on the mixed branch.
    k_mixed: f64,
    eps_q: f64,
    slope_cap: f64,
    event_tol: f64,
    max_order: u8,
    // Nodes in decreasing x.
    xs: Vec<f64>,
    ys: Vec<f64>,
    dl: Vec<f64>,
    dr: Vec<f64>,
    kinks: Vec<Kink>,
    branch: Branch,
    /// Points where the branch switched (crossings of `x# = 0`).
    pub(crate) crossings: Vec<f64>,
}

impl<'a> Marcher<'a> {
    /// `nodes` are `(x, Q, Q'_left, Q'_right)` in increasing `x`; the march
    /// starts at the first of them.
    pub(crate) fn new(
        model: &'a FluxModel,
        ell: f64,
        k_here: f64,
        k_mixed: f64,
        nodes: &[(f64, f64, f64, f64)],
        opts: &SolverOptions,
    ) -> Self {
        let mut m = Marcher {
            model,
            ell,
            k_here,
            k_mixed,
            eps_q: opts.eps_q,
            slope_cap: opts.slope_cap,
            event_tol: opts.crossing_tol,
            max_order: opts.max_breakpoint_order,
            xs: Vec::with_capacity(nodes.len() * 4),
            ys: Vec::with_capacity(nodes.len() * 4),
            dl: Vec::with_capacity(nodes.len() * 4),
            dr: Vec::with_capacity(nodes.len() * 4),
            kinks: Vec::new(),
            branch: Branch::Pure,
            crossings: Vec::new(),
        };
        for &(x, y, l, r) in nodes.iter().rev() {
            m.xs.push(x);
            m.ys.push(y);
            m.dl.push(l);
            m.dr.push(r);
        }
        m
    }

    /// Declares the jump of `k` at the current front and starts on the mixed
    /// branch. The left slope at the front is recomputed accordingly.
    pub(crate) fn start_at_jump(&mut self) -> Result<(), ProfileError> {
        let (x, q) = self.front();
        self.branch = Branch::Mixed;
        self.kinks.push(Kink {
            x,
            order: 1,
            jump: true,
        });
        let d = self.rhs(x, q, Branch::Mixed)?;
        let last = self.dl.len() - 1;
        self.dl[last] = d;
        Ok(())
    }

    pub(crate) fn front(&self) -> (f64, f64) {
        let n = self.xs.len();
        (self.xs[n - 1], self.ys[n - 1])
    }

    /// Value of the known solution at `x`; constant beyond the right end.
    fn known(&self, x: f64) -> Result<f64, ProfileError> {
        let n = self.xs.len();
        if x >= self.xs[0] {
            return Ok(self.ys[0]);
        }
        let p = self.xs.partition_point(|&v| v >= x);
        if p == n {
            return Err(ProfileError::StepRejected { x });
        }
        // xs[p-1] >= x > xs[p]
        let (r, l) = (p - 1, p);
        if x == self.xs[r] {
            return Ok(self.ys[r]);
        }
        let h = self.xs[r] - self.xs[l];
        let (d0, d1) = limit_slopes(self.ys[l], self.ys[r], self.dr[l], self.dl[r], h);
        Ok(hermite(
            self.xs[l], self.xs[r], self.ys[l], self.ys[r], d0, d1, x,
        ))
    }

    fn rhs(&self, x: f64, q: f64, branch: Branch) -> Result<f64, ProfileError> {
        if !(q > self.eps_q && q < 1.0 - self.eps_q) {
            return Err(ProfileError::BlowUp {
                x,
                q,
                slope: f64::NAN,
            });
        }
        let phi = self.model.phi(q);
        let delayed = self.known(x + self.ell / q)?;
        let k_sharp = match branch {
            Branch::Pure => self.k_here,
            Branch::Mixed => self.k_mixed,
        };
        let d = q * q / (self.ell * self.k_here * phi)
            * (self.k_here * phi - k_sharp * self.model.phi(delayed));
        if !d.is_finite() || d.abs() > self.slope_cap {
            return Err(ProfileError::BlowUp { x, q, slope: d });
        }
        Ok(d)
    }

    /// One classical RK4 step of length `tau` toward smaller `x`.
    fn rk4(&self, x: f64, q: f64, tau: f64, branch: Branch) -> Result<f64, ProfileError> {
        let half = 0.5 * tau;
        let k1 = self.rhs(x, q, branch)?;
        let k2 = self.rhs(x - half, q - half * k1, branch)?;
        let k3 = self.rhs(x - half, q - half * k2, branch)?;
        let k4 = self.rhs(x - tau, q - tau * k3, branch)?;
        let qn = q - tau / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !(qn > self.eps_q && qn < 1.0 - self.eps_q) {
            return Err(ProfileError::BlowUp {
                x: x - tau,
                q: qn,
                slope: f64::NAN,
            });
        }
        Ok(qn)
    }

    fn push(&mut self, x: f64, q: f64, left: f64, right: f64) {
        self.xs.push(x);
        self.ys.push(q);
        self.dl.push(left);
        self.dr.push(right);
    }

    /// Advances the front to `x_target < front`, splitting at breakpoints.
    pub(crate) fn advance_to(&mut self, x_target: f64) -> Result<(), ProfileError> {
        loop {
            let (x, q) = self.front();
            let tau = x - x_target;
            if tau <= 0.0 {
                return Ok(());
            }
            let branch = self.branch;
            let q_end = self.rk4(x, q, tau, branch)?;
            let s_start = x + self.ell / q;
            let s_end = x_target + self.ell / q_end;

            // Earliest breakpoint whose image is passed during this step.
            let mut event: Option<(f64, usize)> = None;
            for (idx, kink) in self.kinks.iter().enumerate() {
                if kink.order >= self.max_order && !kink.jump {
                    continue;
                }
                let g0 = s_start - kink.x;
                let g1 = s_end - kink.x;
                if g0.abs() <= self.event_tol || g0.signum() == g1.signum() && g1 != 0.0 {
                    continue;
                }
                let g = |t: f64| match self.rk4(x, q, t, branch) {
                    Ok(qt) => (x - t) + self.ell / qt - kink.x,
                    Err(_) => f64::NAN,
                };
                let t_star = match bisect(g, 0.0, tau, self.event_tol, 200) {
                    Some(t) => t,
                    None => continue,
                };
                if event.is_none_or(|(t, _)| t_star < t) {
                    event = Some((t_star, idx));
                }
            }

            let Some((mut t_star, idx)) = event else {
                let right = self.rhs(x_target, q_end, branch)?;
                self.push(x_target, q_end, right, right);
                return Ok(());
            };
            let kink = self.kinks[idx];
            if tau - t_star < self.event_tol {
                t_star = tau;
            }
            let xe = if t_star == tau { x_target } else { x - t_star };
            let qe = if t_star == tau {
                q_end
            } else {
                self.rk4(x, q, t_star, branch)?
            };
            let next = if kink.jump { branch.flipped() } else { branch };
            let right = self.rhs(xe, qe, branch)?;
            let left = self.rhs(xe, qe, next)?;
            self.push(xe, qe, left, right);
            if kink.jump {
                self.crossings.push(xe);
            }
            if kink.order < self.max_order {
                self.kinks.push(Kink {
                    x: xe,
                    order: kink.order + 1,
                    jump: false,
                });
            }
            self.branch = next;
        }
    }

    /// Nodes in increasing `x`.
    pub(crate) fn into_nodes(self) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let rev = |mut v: Vec<f64>| {
            v.reverse();
            v
        };
        (rev(self.xs), rev(self.ys), rev(self.dl), rev(self.dr))
    }
}
