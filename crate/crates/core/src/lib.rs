//! Solver and simulator for large closed client/server queueing networks
//! modulated by a semi-Markov environment.
//!
//! The crate computes limiting normalized queue-length trajectories via a
//! piecewise closed-form recursion ([`fluid`]), validates them against a
//! pre-limit discrete-event simulation ([`des`]) and a reflected-ODE
//! reference, and solves reliability confidence intervals for symmetric
//! networks with failing client stations ([`reliability`]). [`analysis`]
//! adds trajectory comparison, exceedance measures and strategy costs;
//! [`scenario`] defines the JSON scenario file consumed by the CLI.

pub mod analysis;
pub mod des;
pub mod fluid;
pub mod model;
pub mod numeric;
pub mod reliability;
pub mod scenario;

pub use fluid::{FluidTrajectory, SolveMode};
pub use model::{EnvironmentPath, EnvironmentSpec, NetworkSpec};
