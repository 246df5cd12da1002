//! Velocity law, flux, road condition and the eight-way case classifier.
//!
//! The flux at speed limit `V` is `f(V, rho) = V * rho * phi(rho)`. For a
//! fixed flux level `fbar` the two roads each contribute a sub-critical and a
//! super-critical root, and the position of the asymptotic densities among
//! those roots decides whether stationary profiles exist.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::numeric::bisect;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Bisection budget used by every root search in this module.
pub const ROOT_MAX_ITER: usize = 200;
/// Bracket width at which root searches stop.
pub const ROOT_TOL: f64 = 1e-15;
/// Relative tolerance of the Rankine-Hugoniot flux balance.
pub const RH_TOL: f64 = 1e-10;

/// Number of sample points used when validating `phi`.
const VALIDATION_SAMPLES: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("density {0} outside [0, 1]")]
    DensityDomain(f64),
    #[error("speed limit must be positive, got {0}")]
    SpeedDomain(f64),
    #[error("speed limits must differ (both {0})")]
    EqualSpeeds(f64),
    #[error("velocity law violates {0}")]
    InvalidPhi(String),
    #[error("flux derivative does not change sign on [0, 1]; flux is not unimodal")]
    NotUnimodal,
    #[error("no density with flux {fbar} at speed {speed} (max flux {max})")]
    NoRoot { speed: f64, fbar: f64, max: f64 },
    #[error("Rankine-Hugoniot violated: f-(rho-) = {left}, f+(rho+) = {right}")]
    RhViolation { left: f64, right: f64 },
    #[error("zero flux state (empty or jammed road) has no nontrivial profile")]
    TrivialState,
}

/// Diagnostics gathered when a velocity law is constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiValidation {
    /// Sampled `min(-phi')` over `[0, 1]`.
    pub c_hat0_estimate: f64,
    /// Sampled `min(-d^2/drho^2 [rho phi(rho)])`, i.e. the concavity margin at `V = 1`.
    pub c0_estimate: f64,
    pub warnings: Vec<String>,
}

/// Velocity law `phi` and the flux it generates.
#[derive(Clone)]
pub struct FluxModel {
    name: String,
    phi: ScalarFn,
    phi_prime: Option<ScalarFn>,
    c_hat0: f64,
    validation: PhiValidation,
}

impl fmt::Debug for FluxModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FluxModel")
            .field("name", &self.name)
            .field("c_hat0", &self.c_hat0)
            .field("validation", &self.validation)
            .finish()
    }
}

impl FluxModel {
    /// Builds a velocity law from `phi` and (optionally) its derivative.
    ///
    /// `phi(0) = 1` and `phi(1) = 0` are enforced. The slope bound `c_hat0`
    /// and the concavity margin of the flux are estimated on a grid when not
    /// supplied; small margins produce warnings rather than errors.
    pub fn new<F>(
        name: impl Into<String>,
        phi: F,
        phi_prime: Option<ScalarFn>,
        c_hat0: Option<f64>,
    ) -> Result<Self, ModelError>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let phi: ScalarFn = Arc::new(phi);
        if (phi(0.0) - 1.0).abs() > 1e-12 {
            return Err(ModelError::InvalidPhi(format!(
                "phi(0) = 1 (got {})",
                phi(0.0)
            )));
        }
        if phi(1.0).abs() > 1e-12 {
            return Err(ModelError::InvalidPhi(format!(
                "phi(1) = 0 (got {})",
                phi(1.0)
            )));
        }
        let mut model = FluxModel {
            name: name.into(),
            phi,
            phi_prime,
            c_hat0: 0.0,
            validation: PhiValidation {
                c_hat0_estimate: 0.0,
                c0_estimate: 0.0,
                warnings: Vec::new(),
            },
        };
        model.validation = model.validate(c_hat0);
        model.c_hat0 = c_hat0.unwrap_or(model.validation.c_hat0_estimate);
        Ok(model)
    }

    /// The Lighthill-Whitham law `phi(rho) = 1 - rho`.
    pub fn lighthill_whitham() -> Self {
        Self::new("lw", |r| 1.0 - r, Some(Arc::new(|_| -1.0)), Some(1.0))
            .expect("linear velocity law is valid")
    }

    /// `phi(rho) = 1 - rho^2`; its slope vanishes at zero density.
    pub fn quadratic() -> Self {
        Self::new(
            "quadratic",
            |r| 1.0 - r * r,
            Some(Arc::new(|r| -2.0 * r)),
            None,
        )
        .expect("quadratic velocity law is valid")
    }

    /// Looks up a built-in law by name (`lw`, `quadratic`).
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "lw" | "lighthill-whitham" => Some(Self::lighthill_whitham()),
            "quadratic" => Some(Self::quadratic()),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn c_hat0(&self) -> f64 {
        self.c_hat0
    }

    pub fn validation(&self) -> &PhiValidation {
        &self.validation
    }

    pub fn phi(&self, rho: f64) -> f64 {
        (self.phi)(rho)
    }

    /// `phi'(rho)`, by central differences when no derivative was supplied.
    pub fn phi_prime(&self, rho: f64) -> f64 {
        match &self.phi_prime {
            Some(d) => d(rho),
            None => {
                let h = 1e-6;
                let a = (rho - h).max(0.0);
                let b = (rho + h).min(1.0);
                (self.phi(b) - self.phi(a)) / (b - a)
            }
        }
    }

    /// `f(V, rho) = V rho phi(rho)`.
    pub fn flux(&self, speed: f64, rho: f64) -> Result<f64, ModelError> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(ModelError::DensityDomain(rho));
        }
        if !(speed > 0.0) {
            return Err(ModelError::SpeedDomain(speed));
        }
        Ok(self.flux_unchecked(speed, rho))
    }

    /// Flux without domain checks, for inner loops whose inputs are already validated.
    #[inline]
    pub fn flux_unchecked(&self, speed: f64, rho: f64) -> f64 {
        speed * rho * self.phi(rho)
    }

    /// `d f / d rho = V (phi + rho phi')`.
    pub fn flux_derivative(&self, speed: f64, rho: f64) -> f64 {
        speed * (self.phi(rho) + rho * self.phi_prime(rho))
    }

    /// Density maximizing the flux; independent of the speed limit.
    pub fn critical_density(&self) -> Result<f64, ModelError> {
        bisect(
            |r| self.flux_derivative(1.0, r),
            0.0,
            1.0,
            ROOT_TOL,
            ROOT_MAX_ITER,
        )
        .ok_or(ModelError::NotUnimodal)
    }

    /// Maximum flux `f(V, rho*)`.
    pub fn max_flux(&self, speed: f64) -> Result<f64, ModelError> {
        let rs = self.critical_density()?;
        self.flux(speed, rs)
    }

    /// Sub- and super-critical densities with flux `fbar` at speed `speed`.
    pub fn fbar_roots(&self, speed: f64, fbar: f64) -> Result<(f64, f64), ModelError> {
        if !(speed > 0.0) {
            return Err(ModelError::SpeedDomain(speed));
        }
        let rs = self.critical_density()?;
        let max = self.flux_unchecked(speed, rs);
        let no_root = ModelError::NoRoot { speed, fbar, max };
        if !(fbar > 0.0) || fbar > max * (1.0 + 1e-14) {
            return Err(no_root);
        }
        if fbar >= max * (1.0 - 1e-14) {
            return Ok((rs, rs));
        }
        let g = |r: f64| self.flux_unchecked(speed, r) - fbar;
        let lo = bisect(g, 0.0, rs, ROOT_TOL, ROOT_MAX_ITER).ok_or(no_root.clone())?;
        let hi = bisect(g, rs, 1.0, ROOT_TOL, ROOT_MAX_ITER).ok_or(no_root)?;
        Ok((lo, hi))
    }

    /// Flux balance across the jump at `x = 0`.
    pub fn check_rankine_hugoniot(
        &self,
        road: &RoadCondition,
        rho_minus: f64,
        rho_plus: f64,
    ) -> Result<FluxBalance, ModelError> {
        let left = self.flux(road.v_minus, rho_minus)?;
        let right = self.flux(road.v_plus, rho_plus)?;
        let scale = left.max(right).max(1.0);
        if (left - right).abs() > RH_TOL * scale {
            return Err(ModelError::RhViolation { left, right });
        }
        let fbar = 0.5 * (left + right);
        Ok(FluxBalance {
            fbar,
            trivial: fbar == 0.0,
        })
    }

    /// Classifies the stationary jump `(rho_minus, rho_plus)` into one of the
    /// cases 1A-2D and reports whether profiles exist.
    pub fn classify_case(
        &self,
        road: &RoadCondition,
        rho_minus: f64,
        rho_plus: f64,
    ) -> Result<CaseReport, ModelError> {
        let balance = self.check_rankine_hugoniot(road, rho_minus, rho_plus)?;
        if balance.trivial {
            return Err(ModelError::TrivialState);
        }
        let fbar = balance.fbar;
        let rho_star = self.critical_density()?;
        let (rho1_minus, rho2_minus) = self.fbar_roots(road.v_minus, fbar)?;
        let (rho1_plus, rho2_plus) = self.fbar_roots(road.v_plus, fbar)?;
        let degenerate = rho1_plus == rho2_plus || rho1_minus == rho2_minus;

        // Side of rho* for each asymptote. At most one side can sit exactly at
        // rho*; it is filed so that 1A/2A absorb the degenerate jump when the
        // other side is compatible, and 1D/2D otherwise.
        let left_deg = rho1_minus == rho2_minus;
        let right_deg = rho1_plus == rho2_plus;
        let left_side = (rho_minus - rho1_minus).abs() <= (rho_minus - rho2_minus).abs();
        let right_side = (rho_plus - rho2_plus).abs() <= (rho_plus - rho1_plus).abs();
        let (left_sub, right_super) = match (left_deg, right_deg) {
            (true, _) => (right_side, right_side),
            (_, true) => (left_side, left_side),
            _ => (left_side, right_side),
        };

        let downward = road.v_minus > road.v_plus;
        let label = match (downward, left_sub, right_super) {
            (true, true, true) => CaseLabel::C1A,
            (true, true, false) => CaseLabel::C1B,
            (true, false, true) => CaseLabel::C1C,
            (true, false, false) => CaseLabel::C1D,
            (false, true, true) => CaseLabel::C2A,
            (false, true, false) => CaseLabel::C2B,
            (false, false, true) => CaseLabel::C2C,
            (false, false, false) => CaseLabel::C2D,
        };
        let verdict = label.verdict();
        let q0_range = match label {
            CaseLabel::C1A => Some(Q0Range {
                lo: rho1_plus,
                hi: rho_plus,
                lo_closed: degenerate,
                hi_closed: true,
            }),
            CaseLabel::C2A => Some(Q0Range {
                lo: rho1_plus,
                hi: rho2_minus,
                lo_closed: true,
                hi_closed: true,
            }),
            CaseLabel::C1B | CaseLabel::C2B => Some(Q0Range {
                lo: rho_plus,
                hi: rho_plus,
                lo_closed: true,
                hi_closed: true,
            }),
            _ => None,
        };
        Ok(CaseReport {
            label,
            verdict,
            fbar,
            rho_star,
            rho_minus,
            rho_plus,
            rho1_minus,
            rho2_minus,
            rho1_plus,
            rho2_plus,
            q0_range,
            degenerate,
        })
    }

    /// Classifies the jump given by a flux level and the choice of root on each side.
    pub fn classify_fbar(
        &self,
        road: &RoadCondition,
        fbar: f64,
        left: RootSide,
        right: RootSide,
    ) -> Result<CaseReport, ModelError> {
        let (l1, l2) = self.fbar_roots(road.v_minus, fbar)?;
        let (r1, r2) = self.fbar_roots(road.v_plus, fbar)?;
        let rho_minus = match left {
            RootSide::Low => l1,
            RootSide::High => l2,
        };
        let rho_plus = match right {
            RootSide::Low => r1,
            RootSide::High => r2,
        };
        self.classify_case(road, rho_minus, rho_plus)
    }

    fn validate(&self, c_hat0: Option<f64>) -> PhiValidation {
        let mut warnings = Vec::new();
        let n = VALIDATION_SAMPLES;
        let grid: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        let c_hat0_estimate = grid
            .iter()
            .map(|&r| -self.phi_prime(r))
            .fold(f64::INFINITY, f64::min);
        if c_hat0_estimate < 1e-6 {
            warnings.push(format!(
                "phi' is not bounded away from zero (min -phi' = {c_hat0_estimate:.3e})"
            ));
        }
        if let Some(c) = c_hat0 {
            if c_hat0_estimate < c - 1e-12 {
                warnings.push(format!(
                    "supplied c_hat0 = {c} exceeds sampled min -phi' = {c_hat0_estimate:.6}"
                ));
            }
        }
        let h = 1.0 / n as f64;
        let g = |r: f64| r * self.phi(r);
        let c0_estimate = (1..n)
            .map(|i| {
                let r = grid[i];
                -(g(r + h) - 2.0 * g(r) + g(r - h)) / (h * h)
            })
            .fold(f64::INFINITY, f64::min);
        if c0_estimate < 1e-6 {
            warnings.push(format!(
                "flux is not uniformly concave (min -f'' = {c0_estimate:.3e})"
            ));
        }
        PhiValidation {
            c_hat0_estimate,
            c0_estimate,
            warnings,
        }
    }
}

/// Result of the Rankine-Hugoniot check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxBalance {
    pub fbar: f64,
    /// `fbar == 0`: the road is empty or jammed.
    pub trivial: bool,
}

/// Piecewise-constant speed limit with a single jump at `x = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoadCondition {
    pub v_minus: f64,
    pub v_plus: f64,
}

impl RoadCondition {
    pub fn new(v_minus: f64, v_plus: f64) -> Result<Self, ModelError> {
        for v in [v_minus, v_plus] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ModelError::SpeedDomain(v));
            }
        }
        if v_minus == v_plus {
            return Err(ModelError::EqualSpeeds(v_minus));
        }
        Ok(RoadCondition { v_minus, v_plus })
    }

    /// `k(x)`: `V-` for `x < 0`, `V+` for `x >= 0`.
    #[inline]
    pub fn speed_limit(&self, x: f64) -> f64 {
        if x < 0.0 {
            self.v_minus
        } else {
            self.v_plus
        }
    }

    /// `V- > V+`.
    pub fn is_downward(&self) -> bool {
        self.v_minus > self.v_plus
    }
}

/// Speed limit seen by a profile: uniform, or with the jump at `x = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpeedLimit {
    Uniform(f64),
    Jump(RoadCondition),
}

impl SpeedLimit {
    #[inline]
    pub fn at(&self, x: f64) -> f64 {
        match self {
            SpeedLimit::Uniform(v) => *v,
            SpeedLimit::Jump(road) => road.speed_limit(x),
        }
    }

    /// Position of the discontinuity, if any.
    pub fn jump(&self) -> Option<f64> {
        match self {
            SpeedLimit::Uniform(_) => None,
            SpeedLimit::Jump(_) => Some(0.0),
        }
    }
}

impl From<RoadCondition> for SpeedLimit {
    fn from(road: RoadCondition) -> Self {
        SpeedLimit::Jump(road)
    }
}

/// Which root of `f(V, rho) = fbar` to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootSide {
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseLabel {
    C1A,
    C1B,
    C1C,
    C1D,
    C2A,
    C2B,
    C2C,
    C2D,
}

impl CaseLabel {
    pub const ALL: [CaseLabel; 8] = [
        CaseLabel::C1A,
        CaseLabel::C1B,
        CaseLabel::C1C,
        CaseLabel::C1D,
        CaseLabel::C2A,
        CaseLabel::C2B,
        CaseLabel::C2C,
        CaseLabel::C2D,
    ];

    pub fn verdict(self) -> Verdict {
        match self {
            CaseLabel::C1A | CaseLabel::C2A => Verdict::InfinitelyMany,
            CaseLabel::C1B | CaseLabel::C2B => Verdict::Unique,
            _ => Verdict::None,
        }
    }

    /// Speed ratio sign and root sides that produce this case.
    pub fn sides(self) -> (bool, RootSide, RootSide) {
        use RootSide::*;
        match self {
            CaseLabel::C1A => (true, Low, High),
            CaseLabel::C1B => (true, Low, Low),
            CaseLabel::C1C => (true, High, High),
            CaseLabel::C1D => (true, High, Low),
            CaseLabel::C2A => (false, Low, High),
            CaseLabel::C2B => (false, Low, Low),
            CaseLabel::C2C => (false, High, High),
            CaseLabel::C2D => (false, High, Low),
        }
    }

    pub fn is_monotone_case(self) -> bool {
        matches!(self, CaseLabel::C1A | CaseLabel::C1B)
    }
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CaseLabel::C1A => "1A",
            CaseLabel::C1B => "1B",
            CaseLabel::C1C => "1C",
            CaseLabel::C1D => "1D",
            CaseLabel::C2A => "2A",
            CaseLabel::C2B => "2B",
            CaseLabel::C2C => "2C",
            CaseLabel::C2D => "2D",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for CaseLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CaseLabel::ALL
            .into_iter()
            .find(|c| c.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown case label `{s}` (expected 1A..2D)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    InfinitelyMany,
    Unique,
    None,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verdict::InfinitelyMany => "InfinitelyMany",
            Verdict::Unique => "Unique",
            Verdict::None => "None",
        };
        f.write_str(s)
    }
}

/// Interval of admissible `Q(0)` values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Q0Range {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Q0Range {
    pub fn contains(&self, q: f64) -> bool {
        let above = if self.lo_closed {
            q >= self.lo
        } else {
            q > self.lo
        };
        let below = if self.hi_closed {
            q <= self.hi
        } else {
            q < self.hi
        };
        above && below
    }
}

impl fmt::Display for Q0Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_closed { '[' } else { '(' },
            self.lo,
            self.hi,
            if self.hi_closed { ']' } else { ')' }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseReport {
    pub label: CaseLabel,
    pub verdict: Verdict,
    pub fbar: f64,
    pub rho_star: f64,
    pub rho_minus: f64,
    pub rho_plus: f64,
    /// Roots of `f-(rho) = fbar`, low then high.
    pub rho1_minus: f64,
    pub rho2_minus: f64,
    /// Roots of `f+(rho) = fbar`, low then high.
    pub rho1_plus: f64,
    pub rho2_plus: f64,
    pub q0_range: Option<Q0Range>,
    /// `fbar` equals the maximum of the slower road's flux.
    pub degenerate: bool,
}

impl CaseReport {
    /// The four roots in increasing order.
    pub fn ordered_roots(&self) -> [f64; 4] {
        let mut r = [
            self.rho1_minus,
            self.rho2_minus,
            self.rho1_plus,
            self.rho2_plus,
        ];
        r.sort_by(f64::total_cmp);
        r
    }

    /// `key=value` lines for machine consumption.
    pub fn to_key_values(&self) -> Vec<(String, String)> {
        let mut kv = vec![
            ("label".to_string(), self.label.to_string()),
            ("verdict".to_string(), self.verdict.to_string()),
            ("fbar".to_string(), format!("{:.17e}", self.fbar)),
            ("rho_star".to_string(), format!("{:.17e}", self.rho_star)),
            ("rho_minus".to_string(), format!("{:.17e}", self.rho_minus)),
            ("rho_plus".to_string(), format!("{:.17e}", self.rho_plus)),
            (
                "rho1_minus".to_string(),
                format!("{:.17e}", self.rho1_minus),
            ),
            (
                "rho2_minus".to_string(),
                format!("{:.17e}", self.rho2_minus),
            ),
            ("rho1_plus".to_string(), format!("{:.17e}", self.rho1_plus)),
            ("rho2_plus".to_string(), format!("{:.17e}", self.rho2_plus)),
            ("degenerate".to_string(), self.degenerate.to_string()),
        ];
        if let Some(r) = self.q0_range {
            kv.push(("q0_range".to_string(), r.to_string()));
        }
        kv
    }
}

impl fmt::Display for CaseReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "case {}: {}", self.label, self.verdict)?;
        writeln!(
            f,
            "  fbar = {:.12}, rho* = {:.12}",
            self.fbar, self.rho_star
        )?;
        writeln!(
            f,
            "  rho- = {:.12}, rho+ = {:.12}",
            self.rho_minus, self.rho_plus
        )?;
        writeln!(
            f,
            "  roots: rho1- = {:.12}, rho2- = {:.12}, rho1+ = {:.12}, rho2+ = {:.12}",
            self.rho1_minus, self.rho2_minus, self.rho1_plus, self.rho2_plus
        )?;
        if let Some(r) = self.q0_range {
            writeln!(f, "  admissible Q(0): {r}")?;
        }
        if self.degenerate {
            writeln!(f, "  degenerate: fbar at the maximum of the slower flux")?;
        }
        Ok(())
    }
}
