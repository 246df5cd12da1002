//! Microscopic follow-the-leader dynamics `z_i' = k(z_i) phi(rho_i)` with
//! `rho_i = ell / (z_{i+1} - z_i)`.
//!
//! The speed limit jumps at `x = 0`, so a car's velocity is discontinuous in
//! time when it or its leader crosses the jump. With event resolution on,
//! every crossing is located by bisection on the step length and the step is
//! split there; each RK4 sub-step then sees a frozen speed limit per car.

use thiserror::Error;

use crate::model::{FluxModel, ModelError, RoadCondition};
use crate::profile::{ProfileError, ProfileFamily};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FtlError {
    #[error("cars {index} and {} closer than one car length (gap {gap}) at t = {time}", index + 1)]
    SpacingViolation { index: i64, gap: f64, time: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("no recorded snapshot at t = {time} (nearest {nearest})")]
    AlignmentError { time: f64, nearest: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Relative slack on the minimum gap `ell`, absorbing roundoff only.
const GAP_SLACK: f64 = 1e-12;

/// Cars on the road, ordered by position.
#[derive(Debug, Clone, PartialEq)]
pub struct CarEnsemble {
    positions: Vec<f64>,
    ell: f64,
    /// Density assigned to the lead car, which has no leader.
    front_density: f64,
    /// Index of the rearmost car.
    first_index: i64,
}

impl CarEnsemble {
    pub fn new(
        positions: Vec<f64>,
        ell: f64,
        front_density: f64,
        first_index: i64,
    ) -> Result<Self, FtlError> {
        if !(ell > 0.0) {
            return Err(FtlError::InvalidInput(format!("car length {ell}")));
        }
        if positions.is_empty() {
            return Err(FtlError::InvalidInput("no cars".into()));
        }
        if !(front_density > 0.0 && front_density <= 1.0) {
            return Err(ModelError::DensityDomain(front_density).into());
        }
        check_spacing(&positions, ell, first_index, 0.0)?;
        Ok(CarEnsemble {
            positions,
            ell,
            front_density,
            first_index,
        })
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn front_density(&self) -> f64 {
        self.front_density
    }

    pub fn first_index(&self) -> i64 {
        self.first_index
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

fn check_spacing(z: &[f64], ell: f64, first_index: i64, time: f64) -> Result<(), FtlError> {
    for (k, w) in z.windows(2).enumerate() {
        let gap = w[1] - w[0];
        if !(gap >= ell * (1.0 - GAP_SLACK)) {
            return Err(FtlError::SpacingViolation {
                index: first_index + k as i64,
                gap,
                time,
            });
        }
    }
    Ok(())
}

fn densities_of(z: &[f64], ell: f64, front: f64, out: &mut Vec<f64>) {
    out.clear();
    out.extend(z.windows(2).map(|w| ell / (w[1] - w[0])));
    out.push(front);
}

/// `rho_i = ell / (z_{i+1} - z_i)`; the lead car gets the front density.
pub fn discrete_density(ensemble: &CarEnsemble) -> Result<Vec<f64>, FtlError> {
    check_spacing(&ensemble.positions, ensemble.ell, ensemble.first_index, 0.0)?;
    let mut rho = Vec::with_capacity(ensemble.len());
    densities_of(
        &ensemble.positions,
        ensemble.ell,
        ensemble.front_density,
        &mut rho,
    );
    Ok(rho)
}

/// Velocities `k(z_i) phi(rho_i)`.
pub fn ftl_rhs(
    ensemble: &CarEnsemble,
    model: &FluxModel,
    road: &RoadCondition,
) -> Result<Vec<f64>, FtlError> {
    let rho = discrete_density(ensemble)?;
    Ok(ensemble
        .positions
        .iter()
        .zip(&rho)
        .map(|(&z, &r)| road.speed_limit(z) * model.phi(r))
        .collect())
}

/// Riemann data: `rho_l` behind the jump, `rho_r` ahead of it.
///
/// Cars `0..n_right` sit at `i ell / rho_r`; cars `-n_left..0` at
/// `i ell / rho_l - x0`, so `x0` moves the left lattice back rigidly.
pub fn riemann_initial(
    rho_l: f64,
    rho_r: f64,
    ell: f64,
    x0: f64,
    n_left: usize,
    n_right: usize,
) -> Result<CarEnsemble, FtlError> {
    for rho in [rho_l, rho_r] {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(ModelError::DensityDomain(rho).into());
        }
    }
    if n_right == 0 {
        return Err(FtlError::InvalidInput("need at least one car ahead".into()));
    }
    if !(0.0..=ell / rho_l).contains(&x0) {
        return Err(FtlError::InvalidInput(format!(
            "offset {x0} outside one left spacing [0, {}]",
            ell / rho_l
        )));
    }
    let left = (1..=n_left).rev().map(|j| -(j as f64) * ell / rho_l - x0);
    let right = (0..n_right).map(|i| i as f64 * ell / rho_r);
    CarEnsemble::new(left.chain(right).collect(), ell, rho_r, -(n_left as i64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// The car itself crossed `x = 0`.
    CarCross,
    /// The car's leader crossed `x = 0`.
    LeaderCross,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::CarCross => "car_cross",
            EventKind::LeaderCross => "leader_cross",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub index: i64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Locate crossings of `x = 0` and split steps there.
    pub event_resolved: bool,
    /// Record a snapshot every this many steps.
    pub record_every: usize,
    /// Time accuracy of crossing localization.
    pub event_tol: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            event_resolved: true,
            record_every: 1,
            event_tol: 1e-10,
        }
    }
}

/// Recorded snapshots of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub densities: Vec<Vec<f64>>,
    pub events: Vec<Event>,
    pub ell: f64,
    pub first_index: i64,
    /// Integration step actually used.
    pub dt: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Snapshot index recorded at time `t`.
    pub fn index_at(&self, t: f64) -> Result<usize, FtlError> {
        let tol = 1e-9 * self.dt.max(1e-300);
        let k = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(k, _)| k)
            .ok_or(FtlError::AlignmentError {
                time: t,
                nearest: f64::NAN,
            })?;
        if (self.times[k] - t).abs() > tol {
            return Err(FtlError::AlignmentError {
                time: t,
                nearest: self.times[k],
            });
        }
        Ok(k)
    }

    pub fn final_positions(&self) -> &[f64] {
        &self.positions[self.positions.len() - 1]
    }
}

struct Stepper<'a> {
    model: &'a FluxModel,
    road: &'a RoadCondition,
    ell: f64,
    front: f64,
    event_resolved: bool,
    rho: Vec<f64>,
    stage: Vec<f64>,
    k: [Vec<f64>; 4],
}

impl Stepper<'_> {
    fn velocities(&mut self, z: &[f64], right: &[bool], slot: usize) {
        densities_of(z, self.ell, self.front, &mut self.rho);
        let v = &mut self.k[slot];
        v.clear();
        for i in 0..z.len() {
            let speed = if self.event_resolved {
                if right[i] {
                    self.road.v_plus
                } else {
                    self.road.v_minus
                }
            } else {
                self.road.speed_limit(z[i])
            };
            v.push(speed * self.model.phi(self.rho[i]));
        }
    }

    fn rk4(&mut self, z: &[f64], right: &[bool], dt: f64, out: &mut Vec<f64>) {
        let n = z.len();
        self.velocities(z, right, 0);
        for (slot, c) in [(1, 0.5), (2, 0.5), (3, 1.0)] {
            self.stage.clear();
            for i in 0..n {
                self.stage.push(z[i] + c * dt * self.k[slot - 1][i]);
            }
            let stage = std::mem::take(&mut self.stage);
            self.velocities(&stage, right, slot);
            self.stage = stage;
        }
        out.clear();
        for i in 0..n {
            out.push(
                z[i] + dt / 6.0
                    * (self.k[0][i] + 2.0 * self.k[1][i] + 2.0 * self.k[2][i] + self.k[3][i]),
            );
        }
    }
}

/// Integrates the ensemble over `[0, t_end]` with classical RK4.
///
/// `dt` is shrunk so that a whole number of steps fits into `t_end`.
pub fn simulate(
    ensemble0: &CarEnsemble,
    model: &FluxModel,
    road: &RoadCondition,
    t_end: f64,
    dt: f64,
    opts: &SimOptions,
) -> Result<Trajectory, FtlError> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(FtlError::InvalidInput(format!("dt = {dt}, T = {t_end}")));
    }
    let record_every = opts.record_every.max(1);
    let n_steps = (t_end / dt).ceil().max(1.0) as usize;
    let dt = t_end / n_steps as f64;
    let ell = ensemble0.ell;
    let first = ensemble0.first_index;
    let mut z = ensemble0.positions.clone();
    let mut right: Vec<bool> = z.iter().map(|&x| x >= 0.0).collect();
    let mut stepper = Stepper {
        model,
        road,
        ell,
        front: ensemble0.front_density,
        event_resolved: opts.event_resolved,
        rho: Vec::new(),
        stage: Vec::new(),
        k: Default::default(),
    };
    let mut traj = Trajectory {
        times: Vec::new(),
        positions: Vec::new(),
        densities: Vec::new(),
        events: Vec::new(),
        ell,
        first_index: first,
        dt,
    };
    let record = |traj: &mut Trajectory, t: f64, z: &[f64]| {
        let mut rho = Vec::with_capacity(z.len());
        densities_of(z, ell, ensemble0.front_density, &mut rho);
        traj.times.push(t);
        traj.positions.push(z.to_vec());
        traj.densities.push(rho);
    };
    record(&mut traj, 0.0, &z);

    let mut trial = Vec::with_capacity(z.len());
    let mut probe = Vec::with_capacity(z.len());
    for step in 1..=n_steps {
        let t0 = (step - 1) as f64 * dt;
        let mut done = 0.0;
        loop {
            let tau = dt - done;
            stepper.rk4(&z, &right, tau, &mut trial);
            if !opts.event_resolved {
                std::mem::swap(&mut z, &mut trial);
                break;
            }
            // Cars move forward only, so a crossing is left -> right.
            let crossing: Vec<usize> = (0..z.len())
                .filter(|&i| !right[i] && trial[i] >= 0.0)
                .collect();
            if crossing.is_empty() {
                std::mem::swap(&mut z, &mut trial);
                break;
            }
            // Earliest crossing time in (0, tau].
            let (mut lo, mut hi) = (0.0, tau);
            while hi - lo > opts.event_tol {
                let mid = 0.5 * (lo + hi);
                stepper.rk4(&z, &right, mid, &mut probe);
                if crossing.iter().any(|&i| probe[i] >= 0.0) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            stepper.rk4(&z, &right, hi, &mut probe);
            std::mem::swap(&mut z, &mut probe);
            done += hi;
            let t_event = t0 + done;
            for &i in &crossing {
                if z[i] >= 0.0 {
                    right[i] = true;
                    let index = first + i as i64;
                    traj.events.push(Event {
                        time: t_event,
                        index,
                        kind: EventKind::CarCross,
                    });
                    if i > 0 {
                        traj.events.push(Event {
                            time: t_event,
                            index: index - 1,
                            kind: EventKind::LeaderCross,
                        });
                    }
                }
            }
            let rest = dt - done;
            if rest <= opts.event_tol {
                if rest > 0.0 {
                    stepper.rk4(&z, &right, rest, &mut trial);
                    std::mem::swap(&mut z, &mut trial);
                }
                break;
            }
        }
        if !opts.event_resolved {
            for (i, flag) in right.iter_mut().enumerate() {
                if !*flag && z[i] >= 0.0 {
                    *flag = true;
                    let index = first + i as i64;
                    let time = step as f64 * dt;
                    traj.events.push(Event {
                        time,
                        index,
                        kind: EventKind::CarCross,
                    });
                    if i > 0 {
                        traj.events.push(Event {
                            time,
                            index: index - 1,
                            kind: EventKind::LeaderCross,
                        });
                    }
                }
            }
        }
        let t = step as f64 * dt;
        check_spacing(&z, ell, first, t)?;
        if step % record_every == 0 || step == n_steps {
            record(&mut traj, t, &z);
        }
    }
    Ok(traj)
}

/// Step that moves the fastest car `frac` car lengths.
pub fn default_dt(
    ensemble: &CarEnsemble,
    model: &FluxModel,
    road: &RoadCondition,
    frac: f64,
    cap: f64,
) -> Result<f64, FtlError> {
    let v_max = ftl_rhs(ensemble, model, road)?
        .into_iter()
        .fold(0.0, f64::max);
    let dt = if v_max > 0.0 {
        frac * ensemble.ell / v_max
    } else {
        cap
    };
    Ok(dt.min(cap))
}

/// `max_i |z_i(t + t_p) - z_{i+1}(t)|`, skipping `exclude` cars at each end.
pub fn periodicity_check(
    traj: &Trajectory,
    t: f64,
    t_p: f64,
    exclude: usize,
) -> Result<f64, FtlError> {
    let a = traj.index_at(t)?;
    let b = traj.index_at(t + t_p)?;
    let (za, zb) = (&traj.positions[a], &traj.positions[b]);
    let n = za.len();
    if n < 2 * exclude + 2 {
        return Err(FtlError::InvalidInput("too few cars".into()));
    }
    Ok((exclude..n - 1 - exclude)
        .map(|i| (zb[i] - za[i + 1]).abs())
        .fold(0.0, f64::max))
}

/// Total variation of the family label `Psi` along a snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvPsi {
    pub tv: f64,
    /// Cars off the band between the lowest and highest member.
    pub outside: usize,
    /// Cars where the members are too close together to label.
    pub unresolved: usize,
}

/// Sums `|Psi_i - Psi_{i+1}|` over consecutive cars that both carry a label.
/// `exclude` cars at each end of the window are ignored.
pub fn tv_psi(
    positions: &[f64],
    densities: &[f64],
    family: &ProfileFamily,
    exclude: usize,
) -> TvPsi {
    let n = positions.len();
    let mut out = TvPsi {
        tv: 0.0,
        outside: 0,
        unresolved: 0,
    };
    let mut prev: Option<f64> = None;
    for i in exclude..n.saturating_sub(exclude) {
        match family.psi(positions[i], densities[i]) {
            Ok(p) => {
                if let Some(q) = prev {
                    out.tv += (p - q).abs();
                }
                prev = Some(p);
            }
            Err(ProfileError::Unresolved { .. }) => {
                out.unresolved += 1;
                prev = None;
            }
            Err(_) => {
                out.outside += 1;
                prev = None;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lw() -> FluxModel {
        FluxModel::lighthill_whitham()
    }

    #[test]
    fn uniform_spacing_density() {
        let e = CarEnsemble::new(vec![0.0, 0.4, 0.8, 1.2], 0.2, 0.5, 0).unwrap();
        for r in discrete_density(&e).unwrap() {
            assert!((r - 0.5).abs() < 1e-14);
        }
        let e = CarEnsemble::new(vec![0.0, 0.2], 0.2, 1.0, 0).unwrap();
        assert_eq!(discrete_density(&e).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn overlapping_cars_are_rejected() {
        let err = CarEnsemble::new(vec![0.0, 0.4, 0.5], 0.2, 0.5, -3).unwrap_err();
        assert!(matches!(err, FtlError::SpacingViolation { index: -2, .. }));
    }

    #[test]
    fn velocities_use_right_continuous_limit() {
        let road = RoadCondition::new(2.0, 1.0).unwrap();
        let e = CarEnsemble::new(vec![-1.0, -0.6, 0.0, 0.2], 0.2, 0.5, 0).unwrap();
        let v = ftl_rhs(&e, &lw(), &road).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-15);
        assert!((v[2] - 0.0).abs() < 1e-15);
        assert!((v[3] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn riemann_lattice() {
        let e = riemann_initial(0.6, 0.7, 0.01, 0.0, 3, 3).unwrap();
        let z = e.positions();
        assert_eq!(z[3], 0.0);
        assert!((z[4] - 0.01 / 0.7).abs() < 1e-15);
        assert!((z[2] + 0.01 / 0.6).abs() < 1e-15);
        assert_eq!(e.first_index(), -3);
        let shifted = riemann_initial(0.6, 0.7, 0.01, 0.3 * 0.01 / 0.6, 3, 3).unwrap();
        assert!((shifted.positions()[2] - z[2] + 0.3 * 0.01 / 0.6).abs() < 1e-15);
    }

    #[test]
    fn lone_car_moves_uniformly() {
        let road = RoadCondition::new(2.0, 1.0).unwrap();
        let e = CarEnsemble::new(vec![1.0], 0.2, 0.3, 0).unwrap();
        let tr = simulate(&e, &lw(), &road, 2.0, 0.01, &SimOptions::default()).unwrap();
        assert!((tr.final_positions()[0] - (1.0 + 0.7 * 2.0)).abs() < 1e-12);
    }

    #[test]
    fn crossing_is_logged_once() {
        let road = RoadCondition::new(2.0, 1.0).unwrap();
        let e = CarEnsemble::new(vec![-0.05, 1.0], 0.2, 0.5, 0).unwrap();
        let tr = simulate(&e, &lw(), &road, 0.2, 0.01, &SimOptions::default()).unwrap();
        let cars: Vec<_> = tr
            .events
            .iter()
            .filter(|e| e.kind == EventKind::CarCross)
            .collect();
        assert_eq!(cars.len(), 1);
        assert_eq!(cars[0].index, 0);
    }
}
