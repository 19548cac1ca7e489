use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{grad_step, Mlp, Optimizer};
use crate::seeding::rng_for;

/// One executed step: observation, executed shares and the cost they incurred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSample {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub cost: f64,
}

/// Ensemble regressor of the immediate constraint value `c(s, a)`.
///
/// Every member shares the architecture `[state ⊕ action, hidden…, 1]` and
/// differs only by its initialisation seed.
#[derive(Debug, Clone)]
pub struct CostCritic {
    members: Vec<Mlp>,
    optimizers: Vec<Optimizer>,
    state_dim: usize,
    action_dim: usize,
}

impl CostCritic {
    pub fn new(state_dim: usize, action_dim: usize, hidden: &[usize], ensemble_size: usize, seed: u64) -> Self {
        let mut sizes = vec![state_dim + action_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let members: Vec<Mlp> = (0..ensemble_size)
            .map(|i| Mlp::new(&sizes, &mut rng_for(seed, i as u64)))
            .collect();
        Self::from_members(members, state_dim, action_dim)
    }

    pub fn from_members(members: Vec<Mlp>, state_dim: usize, action_dim: usize) -> Self {
        assert!(!members.is_empty(), "ensemble needs at least one member");
        let optimizers = members.iter().map(|m| Optimizer::adam(m.num_params())).collect();
        Self {
            members,
            optimizers,
            state_dim,
            action_dim,
        }
    }

    pub fn members(&self) -> &[Mlp] {
        &self.members
    }

    pub fn ensemble_size(&self) -> usize {
        self.members.len()
    }

    fn input(&self, state: &[f64], action: &[f64]) -> Result<Vec<f64>> {
        if state.len() != self.state_dim {
            return Err(Error::Dimension {
                context: "cost critic state",
                expected: self.state_dim,
                got: state.len(),
            });
        }
        if action.len() != self.action_dim {
            return Err(Error::Dimension {
                context: "cost critic action",
                expected: self.action_dim,
                got: action.len(),
            });
        }
        let mut x = Vec::with_capacity(state.len() + action.len());
        x.extend_from_slice(state);
        x.extend_from_slice(action);
        Ok(x)
    }

    /// Ensemble mean and population standard deviation (zero for a single member).
    pub fn predict(&self, state: &[f64], action: &[f64]) -> Result<(f64, f64)> {
        let x = self.input(state, action)?;
        let preds: Vec<f64> = self
            .members
            .iter()
            .map(|m| m.forward(&x).map(|o| o[0]))
            .collect::<Result<_>>()?;
        let n = preds.len() as f64;
        let mean = preds.iter().sum::<f64>() / n;
        let var = preds.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n;
        Ok((mean, var.sqrt()))
    }

    /// One mean-squared-error step per member; returns the post-step ensemble MSE.
    pub fn train_step(&mut self, batch: &[CostSample], lr: f64) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Config("cost critic batch is empty".into()));
        }
        if batch.iter().any(|s| !s.cost.is_finite()) {
            return Err(Error::NonFinite("cost critic target"));
        }
        let inputs: Vec<Vec<f64>> = batch
            .iter()
            .map(|s| self.input(&s.state, &s.action))
            .collect::<Result<_>>()?;
        let n = batch.len() as f64;
        for (member, opt) in self.members.iter_mut().zip(&mut self.optimizers) {
            let mut grad = vec![0.0; member.num_params()];
            for (x, s) in inputs.iter().zip(batch) {
                let trace = member.forward_trace(x)?;
                let err = trace.output()[0] - s.cost;
                member.accumulate_backward(&trace, &[err], 2.0 / n, &mut grad)?;
            }
            grad_step(member.params_mut(), &grad, opt, lr)?;
        }
        let mut total = 0.0;
        for member in &self.members {
            for (x, s) in inputs.iter().zip(batch) {
                total += (member.forward(x)?[0] - s.cost).powi(2);
            }
        }
        Ok(total / (n * self.members.len() as f64))
    }
}

pub fn train_cost_critic(critic: &mut CostCritic, batch: &[CostSample], lr: f64) -> Result<f64> {
    critic.train_step(batch, lr)
}

pub fn predict_cost(critic: &CostCritic, state: &[f64], action: &[f64]) -> Result<(f64, f64)> {
    critic.predict(state, action)
}
