//! Discrete-time simulator of an end-to-end sliced network.
//!
//! Every slice traverses the domain chain RAN → TN → CN → EDGE (or the
//! configured prefix-free subset of it, in chain order). Inside a domain
//! each slice is served by its own M/M/1-style server whose rate is
//! `service_rate · capacity · share`. One timeslot lasts `Δt = 1` second.

mod baseline;
pub(crate) mod scenario;
mod sim;
mod types;

pub use baseline::{baseline_policy, BaselineDecision};
pub use scenario::{DomainId, DomainSpec, ScenarioConfig, SliceSpec, TrafficModel, DEFAULT_HEADROOM, DEFAULT_L_MAX};
pub use sim::{cost_fn, throughput_margin, evaluate, reward_fn, Evaluation, SliceEnv, SlicingNetwork};
pub use types::{AllocationAction, NetworkState, StepOutcome};

/// Length of one timeslot, in seconds.
pub const SLOT_SECONDS: f64 = 1.0;

/// Floor on the throughput normaliser for best-effort slices.
pub const EPS_THROUGHPUT: f64 = 1e-6;
