//! Fully-connected parametric functions with analytic gradients.
//!
//! [`Mlp`] is the shared building block for the policy mean network, the
//! reward and cost value critics and every member of the cost-critic
//! ensemble. Parameters live in one flat vector so that optimizers,
//! checkpoints and finite-difference checks all see the same layout.

mod checkpoint;
mod mlp;
mod optim;
mod policy;
mod projection;

pub use checkpoint::{load_mlp, load_policy, save_mlp, save_policy, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use mlp::{Mlp, Trace};
pub use optim::{grad_step, Optimizer, OptimizerKind};
pub use policy::{clip_exploration, gaussian_log_density, ExplorationConfig, GaussianPolicy, LOG_STD_MAX, LOG_STD_MIN};
pub use projection::{initial_share_bias, logistic, logit, project_action, project_action_vjp};

/// Hidden layer widths used by default for every network.
pub const DEFAULT_HIDDEN: [usize; 2] = [64, 64];
