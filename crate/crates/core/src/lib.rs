//! Queueing-network optimization toolkit.
//!
//! The crate bundles:
//! - queue dynamics, the Lyapunov potential, and four reward shapers
//!   ([`queue`]);
//! - two seeded simulators: mobile edge computing offloading ([`mec`]) and
//!   store-and-forward routing with a max-weight baseline ([`routing`]);
//! - compact built-in policy-optimization trainers ([`agents`]);
//! - an experiment harness that sweeps weights and arrival rates and emits
//!   CSV metrics ([`harness`]).

pub mod agents;
pub mod env;
pub mod harness;
pub mod mec;
pub mod numfmt;
pub mod queue;
pub mod routing;

pub use env::{ActionSpec, AgentAction, Environment, Transition};
pub use queue::{
    mean_rate_stability_score, realized_drift, PenaltySeries, QueueFlow, QueueVector, RewardShaper,
    ShaperKind,
};
