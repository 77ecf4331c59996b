//! One-dimensional Hughes pedestrian-evacuation dynamics with affine cost.
//!
//! Two exits at x = ±1, agents described by a density ρ(t, x) transported
//! toward the exit with the lower accumulated cost c(ρ) = 1 + α ρ; the
//! direction field flips at the turning point ξ(t) balancing the cost to
//! both exits. The crate provides:
//!
//! * the deterministic follow-the-leader particle scheme ([`ftl`]) with
//!   exact atomization, turning-index dynamics, density reconstruction and
//!   evacuation-time detection;
//! * a finite-volume Godunov oracle for the same problem ([`godunov`]) used
//!   to cross-validate the particle scheme in the well-separated regime,
//!   plus a Kruzhkov entropy audit ([`entropy`]);
//! * the experiment harness ([`experiments`]): evacuation-time sweeps over
//!   the cost slope and datum perturbations with a deterministic jump
//!   detector, and empirical checks of the turning-curve velocity formula,
//!   the L1 stability ratio, the restart property and cross-scheme
//!   convergence;
//! * versioned JSON scenario files ([`scenario`]) for reproducible runs.

pub mod density;
pub mod entropy;
pub mod error;
pub mod experiments;
pub mod ftl;
pub mod godunov;
pub mod model;
pub mod scenario;
pub mod turning;

pub use density::PiecewiseConstantDensity;
pub use error::{Error, Result};
pub use ftl::{ParticleSystemState, Trajectory};
pub use model::ModelParams;
pub use scenario::Scenario;
pub use turning::TurningState;
