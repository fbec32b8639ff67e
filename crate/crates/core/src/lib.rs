//! Delay-minimizing uplink resource allocation for a fronthaul-limited CRAN
//! cluster.
//!
//! The crate solves two constrained MDPs in closed form via perturbation
//! theory — a time-average regime with joint fronthaul/power control and a
//! discounted regime for geometrically distributed service horizons — and
//! ships the Monte-Carlo experiment harness that exercises the resulting
//! per-slot allocation policies.
//!
//! The math core (`numerics`, `linalg`, `model`, `queueing`, `priority`,
//! `allocator`) is generic over the floating scalar via [`numerics::Real`];
//! the simulation engine and the oracles run in `f64` (aliases below).

pub mod allocator;
pub mod error;
pub mod linalg;
pub mod model;
pub mod numerics;
pub mod oracles;
pub mod priority;
pub mod queueing;
pub mod sim;
pub mod validate;

pub use error::{Error, Result};
pub use numerics::Real;

/// Working precision of the simulation engine.
pub type DefaultScalar = f64;

pub type ClusterConfig64 = model::ClusterConfig<DefaultScalar>;
pub type ChannelRealization64 = model::ChannelRealization<DefaultScalar>;
pub type Allocation64 = model::Allocation<DefaultScalar>;
pub type Trace64 = queueing::Trace<DefaultScalar>;
pub type Metrics64 = queueing::Metrics<DefaultScalar>;
pub type SolverParams64 = priority::SolverParams<DefaultScalar>;
pub type PriorityTable64 = priority::PriorityTable<DefaultScalar>;
