//! Safe sliding-mode position control for uncertain double-integrator systems.
//!
//! The plant is `ẍ = G(x)((I + Δ_b)u + δ)`. A barrier-function safety filter
//! turns a desired velocity field into a safe single-integrator field `v(x)`,
//! the sliding variable `σ = ẋ − v(x)` defines the manifold the controller
//! drives the state to, and a reaching gain derived from the barrier keeps the
//! position inside the safe set during the reaching phase as well.
//!
//! Modules:
//!
//! * [`cbf`]: circular-obstacle barrier `h`, its gradient, safe sets and the
//!   gradient bound `η`.
//! * [`safety_filter`]: closed-form QP filter, its smoothed variant and the
//!   derivative of `v` along trajectories.
//! * [`sliding_control`]: sliding variable, the unit-vector control law, the
//!   safe reaching constant `κ` and the barrier-function adaptive gain.
//! * [`plant`]: uncertainty catalog, closed-loop right-hand side and the
//!   assumption checkers.
//! * [`simulator`]: fixed-step integration and trajectory recording.
//! * [`monitors`]: runtime checks of the safety and reaching inequalities.
//! * [`oracle`]: independent references (halfspace projection, finite
//!   difference checks) used by the test suites.
//! * [`scenario`]: declarative scenario files and their resolution into runs.
//! * [`trajectory_csv`]: CSV encoding of recorded trajectories.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cbf;
pub mod error;
pub mod monitors;
pub mod oracle;
pub mod plant;
pub mod safety_filter;
pub mod scenario;
pub mod simulator;
pub mod sliding_control;
pub mod trajectory_csv;

pub use error::{Error, Result};

/// Column vector of dynamic dimension.
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix of dynamic dimension.
pub type Matrix = nalgebra::DMatrix<f64>;

/// Spectral (induced 2-) norm of a matrix.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}
