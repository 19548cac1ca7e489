//! Safety-constrained policy optimisation.
//!
//! Three mechanisms work together:
//!
//! 1. **Lagrangian primal-dual.** The policy is trained on the shaped reward
//!    `r − λ·c`; every `update_period` iterations the multiplier takes a
//!    projected sub-gradient step `λ ← max(0, λ + η · avg_cost)`.
//! 2. **Cost critic.** An ensemble regresses the immediate constraint value
//!    `c(s, a)` from the state and the proposed allocation.
//! 3. **Baseline switching.** When the ensemble predicts
//!    `mean + κ·std > threshold`, the proposal is replaced by the rule-based
//!    baseline, which meets SLAs at the price of higher resource usage.
//!
//! Policy updates use the clipped importance-ratio surrogate.

mod agent;
mod critic;
mod surrogate;
mod trainer;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::DiscountConfig;
use crate::neural::{ExplorationConfig, DEFAULT_HIDDEN};

pub use agent::{AgentBatch, Proposal, SafeAgent, UpdateStats, ValueHead};
pub use critic::{predict_cost, train_cost_critic, CostCritic, CostSample};
pub use surrogate::{surrogate_loss, SurrogateOutput};
pub(crate) use trainer::{episode_seed, make_agents};
pub use trainer::{
    aggregate_and_update, evaluate_policy, run_training, select_action, train_safe, train_safe_from, AgentLayout,
    EvalStats, GlobalLayout, Selection,
};

/// Dual variable for the single aggregated cost stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagrangianState {
    pub multiplier: f64,
    pub eta: f64,
    /// Number of training iterations (rollouts) between dual updates.
    pub update_period: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LagrangianConfig {
    pub initial: f64,
    pub eta: f64,
    pub update_period: usize,
}

impl Default for LagrangianConfig {
    fn default() -> Self {
        Self {
            initial: 0.0,
            eta: 0.05,
            update_period: 5,
        }
    }
}

impl LagrangianConfig {
    pub fn state(&self) -> LagrangianState {
        LagrangianState {
            multiplier: self.initial,
            eta: self.eta,
            update_period: self.update_period,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwitchConfig {
    pub threshold: f64,
    pub kappa: f64,
    pub enabled: bool,
}

impl Default for SwitchConfig {
    fn default() -> Self {
        Self {
            threshold: 0.0,
            kappa: 1.0,
            enabled: true,
        }
    }
}

impl SwitchConfig {
    /// True when the prediction is unsafe with the configured confidence.
    pub fn triggers(&self, mean: f64, std: f64) -> bool {
        self.enabled && mean + self.kappa * std > self.threshold
    }
}

/// `r − λ·c`.
pub fn shaped_reward(reward: f64, cost: f64, lag: &LagrangianState) -> f64 {
    reward - lag.multiplier * cost
}

/// Projected dual ascent `λ′ = max(0, λ + η · avg_cost)`.
pub fn update_multiplier(lag: &LagrangianState, avg_cost: f64) -> LagrangianState {
    LagrangianState {
        multiplier: (lag.multiplier + lag.eta * avg_cost).max(0.0),
        ..*lag
    }
}

/// Every tunable of safe training. Unknown keys are rejected when parsed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SafeConfig {
    pub iterations: usize,
    /// Transitions collected per iteration.
    pub rollout_len: usize,
    /// Timeslots per episode; the network is reset with a fresh derived seed afterwards.
    pub episode_len: usize,
    pub hidden: Vec<usize>,
    pub discount: DiscountConfig,
    pub clip_eps: f64,
    pub policy_lr: f64,
    pub critic_lr: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub entropy_coef: f64,
    pub ensemble_size: usize,
    /// Passes over each rollout when fitting the cost-critic ensemble.
    pub cost_critic_epochs: usize,
    pub exploration: ExplorationConfig,
    pub switch: SwitchConfig,
    pub lagrangian: LagrangianConfig,
}

impl Default for SafeConfig {
    fn default() -> Self {
        Self {
            iterations: 150,
            rollout_len: 256,
            episode_len: 64,
            hidden: DEFAULT_HIDDEN.to_vec(),
            discount: DiscountConfig::default(),
            clip_eps: 0.2,
            policy_lr: 3e-4,
            critic_lr: 1e-3,
            epochs: 10,
            minibatch: 64,
            entropy_coef: 0.0,
            ensemble_size: 5,
            cost_critic_epochs: 4,
            exploration: ExplorationConfig::default(),
            switch: SwitchConfig::default(),
            lagrangian: LagrangianConfig::default(),
        }
    }
}

impl SafeConfig {
    pub fn validate(&self) -> Result<()> {
        self.discount.validate()?;
        self.exploration.validate()?;
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.rollout_len == 0 || self.episode_len == 0 || self.minibatch == 0 {
            return bad("rollout_len, episode_len and minibatch must be positive");
        }
        if self.ensemble_size == 0 {
            return bad("ensemble_size must be at least 1");
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer sizes must be positive");
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return bad("clip_eps must lie in (0, 1)");
        }
        if !(self.policy_lr >= 0.0 && self.critic_lr >= 0.0) {
            return bad("learning rates must be non-negative");
        }
        if self.switch.kappa < 0.0 {
            return bad("switch.kappa must be >= 0");
        }
        if self.lagrangian.initial < 0.0 || self.lagrangian.eta < 0.0 || self.lagrangian.update_period == 0 {
            return bad("lagrangian.initial and eta must be >= 0 and update_period >= 1");
        }
        Ok(())
    }
}
