//! Desk-scale end-to-end network slicing.
//!
//! The crate couples a discrete-time simulator of a sliced network spanning
//! the radio access (RAN), transport (TN), core (CN) and edge (EDGE) domains
//! with constrained deep reinforcement learning for resource orchestration:
//!
//! - [`slice_env`]: traffic, M/M/1-style per-domain queues, reward and SLA cost.
//! - [`mdp`]: transitions, trajectories, returns and dual-stream advantages.
//! - [`neural`]: fully-connected networks with analytic gradients, Gaussian
//!   policies, clipped exploration, action projection, optimizers, checkpoints.
//! - [`safe`]: Lagrangian primal-dual PPO with a cost-critic ensemble and a
//!   baseline switching gate.
//! - [`multi_agent`]: per-domain (or per-slice) agents with SLA decomposition.
//! - [`imitation`]: behaviour cloning of the baseline policy as a warm start.
//! - [`orchestrator`]: domain managers, experiment configs, runs and reports.
//!
//! Runnable walkthroughs live in the `examples/` directory of this crate.

pub mod error;
pub mod imitation;
pub mod mdp;
pub mod multi_agent;
pub mod neural;
pub mod orchestrator;
pub mod report;
pub mod seeding;
pub mod safe;
pub mod slice_env;

pub use error::{Error, Result};
