//! Fuel-proxy-optimal approach trajectories toward a traffic signal whose
//! switch to green happens at a random step.
//!
//! Three exchangeable solvers work on the same stochastic Bellman recursion:
//!
//! * [`sdp`]: backward recursion over the full discretized state space,
//! * [`dddp`]: the same recursion restricted to a shrinking corridor around an
//!   incumbent trajectory,
//! * [`ddp`]: per-stage quadratic models of the Bellman right-hand side with a
//!   box-constrained control and a linear feedback law, no discretization.
//!
//! [`deterministic`] provides the closed-form known-switching-time solution that
//! serves as escape cost after the switch and as the pessimistic initializer.

pub mod dddp;
pub mod ddp;
pub mod deterministic;
pub mod error;
pub mod escape;
pub mod grid;
pub mod model;
pub mod prior;
pub mod sdp;

pub use error::{GlosaError, Result};
pub use model::{step_kinematics, Bounds, Scenario, Trajectory, VehicleState};
pub use prior::{SwitchingPrior, SwitchingProcess};
