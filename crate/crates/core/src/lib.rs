//! Stationary traveling-wave profiles of the follow-the-leader traffic model
//! on a road whose speed limit jumps at `x = 0`.
//!
//! * [`model`]: velocity law, flux, road condition and the case classifier.
//! * [`profile`]: the delay differential equation for stationary profiles,
//!   solved backward in `x` by the method of steps, plus its diagnostics.
//! * [`ftl`]: the microscopic car-following simulation.
//! * [`viscous`]: stationary viscous profiles and the viscous conservation law.
//! * [`io`]: CSV emitters for every result type.

pub mod ftl;
pub mod interp;
pub mod io;
pub mod model;
pub mod numeric;
pub mod profile;
pub mod viscous;

pub use model::{CaseLabel, CaseReport, FluxModel, ModelError, RoadCondition, RootSide, Verdict};
