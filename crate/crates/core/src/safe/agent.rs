use rand::Rng;

use super::critic::{CostCritic, CostSample};
use super::surrogate::surrogate_loss;
use super::{LagrangianState, SafeConfig};
use crate::error::{Error, Result};
use crate::mdp::{compute_advantages, minibatches, normalize_advantages, Trajectory, Transition};
use crate::neural::{clip_exploration, gaussian_log_density, grad_step, ExplorationConfig, GaussianPolicy, Mlp, Optimizer};
use crate::seeding::{derive_seed, rng_for, STREAM_COST_VALUE_INIT, STREAM_CRITIC_INIT, STREAM_POLICY_INIT, STREAM_VALUE_INIT};

/// Scalar state-value network fitted on standardised targets.
///
/// Predictions are `offset + scale · net(s)`; `offset` and `scale` track an
/// exponential moving average of the target mean and spread.
#[derive(Debug, Clone)]
pub struct ValueHead {
    pub net: Mlp,
    offset: f64,
    scale: f64,
    initialised: bool,
    optimizer: Optimizer,
}

const TARGET_STATS_RATE: f64 = 0.1;

impl ValueHead {
    pub fn new(net: Mlp) -> Self {
        let optimizer = Optimizer::adam(net.num_params());
        Self {
            net,
            offset: 0.0,
            scale: 1.0,
            initialised: false,
            optimizer,
        }
    }

    pub fn predict(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.offset + self.scale * self.net.forward(obs)?[0])
    }

    pub fn observe_targets(&mut self, targets: &[f64]) {
        if targets.is_empty() {
            return;
        }
        let n = targets.len() as f64;
        let mean = targets.iter().sum::<f64>() / n;
        let std = (targets.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n).sqrt().max(1e-3);
        if self.initialised {
            self.offset += TARGET_STATS_RATE * (mean - self.offset);
            self.scale += TARGET_STATS_RATE * (std - self.scale);
        } else {
            self.offset = mean;
            self.scale = std;
            self.initialised = true;
        }
    }

    /// One squared-error step on the given samples; returns the pre-step loss in target units.
    pub fn fit_step(&mut self, obs: &[&[f64]], targets: &[f64], lr: f64) -> Result<f64> {
        let n = obs.len() as f64;
        let mut grad = vec![0.0; self.net.num_params()];
        let mut loss = 0.0;
        for (x, y) in obs.iter().zip(targets) {
            let trace = self.net.forward_trace(x)?;
            let err = trace.output()[0] - (y - self.offset) / self.scale;
            loss += 0.5 * (err * self.scale).powi(2);
            self.net.accumulate_backward(&trace, &[err], 1.0 / n, &mut grad)?;
        }
        grad_step(self.net.params_mut(), &grad, &mut self.optimizer, lr)?;
        Ok(loss / n)
    }
}

/// A raw proposal from the policy after clipped exploration.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub raw: Vec<f64>,
    pub logp: f64,
}

/// Experience of one agent for one training iteration.
#[derive(Debug, Clone, Default)]
pub struct AgentBatch {
    pub transitions: Vec<Transition>,
    /// Observation following the last transition when it did not end an episode.
    pub bootstrap_obs: Option<Vec<f64>>,
    pub cost_samples: Vec<CostSample>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub cost_value_loss: f64,
    pub critic_mse: f64,
    pub clip_fraction: f64,
    /// Minibatches skipped because of a non-finite gradient.
    pub skipped_batches: usize,
}

/// Policy, reward and cost value critics, cost-critic ensemble and multiplier of one learner.
#[derive(Debug, Clone)]
pub struct SafeAgent {
    pub policy: GaussianPolicy,
    pub value: ValueHead,
    pub cost_value: ValueHead,
    pub critic: CostCritic,
    pub lagrangian: LagrangianState,
    policy_opt: Optimizer,
    log_std_opt: Optimizer,
    pub version: u64,
}

fn value_sizes(obs_dim: usize, hidden: &[usize]) -> Vec<usize> {
    let mut sizes = vec![obs_dim];
    sizes.extend_from_slice(hidden);
    sizes.push(1);
    sizes
}

impl SafeAgent {
    pub fn new(obs_dim: usize, act_dim: usize, config: &SafeConfig, seed: u64) -> Self {
        let policy = GaussianPolicy::new(
            obs_dim,
            act_dim,
            &config.hidden,
            config.exploration.sigma,
            &mut rng_for(seed, STREAM_POLICY_INIT),
        );
        Self::with_policy(policy, config, seed)
    }

    /// Wraps an existing policy (e.g. from behaviour cloning) with freshly initialised critics.
    pub fn with_policy(policy: GaussianPolicy, config: &SafeConfig, seed: u64) -> Self {
        let (obs_dim, act_dim) = (policy.obs_dim(), policy.act_dim());
        let sizes = value_sizes(obs_dim, &config.hidden);
        let value = ValueHead::new(Mlp::new(&sizes, &mut rng_for(seed, STREAM_VALUE_INIT)));
        let cost_value = ValueHead::new(Mlp::new(&sizes, &mut rng_for(seed, STREAM_COST_VALUE_INIT)));
        let critic = CostCritic::new(
            obs_dim,
            act_dim,
            &config.hidden,
            config.ensemble_size,
            derive_seed(seed, STREAM_CRITIC_INIT),
        );
        let policy_opt = Optimizer::adam(policy.mean_net.num_params());
        let log_std_opt = Optimizer::adam(act_dim);
        Self {
            policy,
            value,
            cost_value,
            critic,
            lagrangian: config.lagrangian.state(),
            policy_opt,
            log_std_opt,
            version: 0,
        }
    }

    /// Samples `mean + clip(σz, −H, H)`; the log density is evaluated at the clipped point.
    pub fn propose<R: Rng + ?Sized>(&self, obs: &[f64], exploration: &ExplorationConfig, rng: &mut R) -> Result<Proposal> {
        let mean = self.policy.mean(obs)?;
        let (sample, _) = self.policy.sample_action(obs, rng)?;
        let noise: Vec<f64> = sample.iter().zip(&mean).map(|(s, m)| s - m).collect();
        let raw = clip_exploration(&mean, &noise, exploration)?;
        let logp = gaussian_log_density(&raw, &mean, &self.policy.log_std);
        Ok(Proposal { raw, logp })
    }

    pub fn propose_mean(&self, obs: &[f64]) -> Result<Proposal> {
        let raw = self.policy.mean(obs)?;
        let logp = gaussian_log_density(&raw, &raw, &self.policy.log_std);
        Ok(Proposal { raw, logp })
    }

    /// One learner update: fit advantages on the shaped stream, run the
    /// clipped-surrogate epochs, refit both value heads and the cost ensemble.
    pub fn update<R: Rng + ?Sized>(&mut self, batch: &AgentBatch, config: &SafeConfig, rng: &mut R) -> Result<UpdateStats> {
        let n = batch.transitions.len();
        if n == 0 {
            return Err(Error::Config("agent batch is empty".into()));
        }
        let mut reward_values = Vec::with_capacity(n + 1);
        let mut cost_values = Vec::with_capacity(n + 1);
        for t in &batch.transitions {
            reward_values.push(self.value.predict(&t.state_vec)?);
            cost_values.push(self.cost_value.predict(&t.state_vec)?);
        }
        match &batch.bootstrap_obs {
            Some(obs) => {
                reward_values.push(self.value.predict(obs)?);
                cost_values.push(self.cost_value.predict(obs)?);
            }
            None => {
                reward_values.push(0.0);
                cost_values.push(0.0);
            }
        }
        let traj = compute_advantages(
            Trajectory::new(batch.transitions.clone()),
            &reward_values,
            &cost_values,
            &config.discount,
        )?;
        let lambda = self.lagrangian.multiplier;
        let shaped: Vec<f64> = traj
            .reward_advantages
            .iter()
            .zip(&traj.cost_advantages)
            .map(|(ra, ca)| ra - lambda * ca)
            .collect();
        let advantages = normalize_advantages(&shaped);
        if advantages.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("advantages"));
        }
        self.value.observe_targets(&traj.reward_returns);
        self.cost_value.observe_targets(&traj.cost_returns);

        let mut stats = UpdateStats::default();
        let mut policy_steps = 0usize;
        for _ in 0..config.epochs {
            for idx in minibatches(n, config.minibatch, rng) {
                let refs: Vec<&Transition> = idx.iter().map(|&i| &traj.transitions[i]).collect();
                let old: Vec<f64> = refs.iter().map(|t| t.logp).collect();
                let adv: Vec<f64> = idx.iter().map(|&i| advantages[i]).collect();
                let out = surrogate_loss(&self.policy, &refs, &old, &adv, config.clip_eps, config.entropy_coef)?;
                let applied = grad_step(self.policy.mean_net.params_mut(), &out.net_grad, &mut self.policy_opt, config.policy_lr)
                    .and_then(|_| grad_step(&mut self.policy.log_std, &out.log_std_grad, &mut self.log_std_opt, config.policy_lr));
                match applied {
                    Ok(()) => {
                        self.policy.clamp_log_std();
                        stats.policy_loss += out.loss;
                        stats.clip_fraction += out.clip_fraction;
                        policy_steps += 1;
                    }
                    Err(Error::NonFinite(_)) => stats.skipped_batches += 1,
                    Err(e) => return Err(e),
                }

                let obs: Vec<&[f64]> = refs.iter().map(|t| t.state_vec.as_slice()).collect();
                let rt: Vec<f64> = idx.iter().map(|&i| traj.reward_returns[i]).collect();
                let ct: Vec<f64> = idx.iter().map(|&i| traj.cost_returns[i]).collect();
                stats.value_loss = self.value.fit_step(&obs, &rt, config.critic_lr)?;
                stats.cost_value_loss = self.cost_value.fit_step(&obs, &ct, config.critic_lr)?;
            }
        }
        if policy_steps > 0 {
            stats.policy_loss /= policy_steps as f64;
            stats.clip_fraction /= policy_steps as f64;
        }
        for _ in 0..config.cost_critic_epochs {
            for idx in minibatches(batch.cost_samples.len(), config.minibatch, rng) {
                let mb: Vec<CostSample> = idx.iter().map(|&i| batch.cost_samples[i].clone()).collect();
                stats.critic_mse = self.critic.train_step(&mb, config.critic_lr)?;
            }
        }
        self.version += 1;
        Ok(stats)
    }
}
