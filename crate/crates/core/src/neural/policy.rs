use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Mlp;
use crate::error::{Error, Result};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Diagonal Gaussian over raw (unconstrained) actions with a state-dependent mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicy {
    pub mean_net: Mlp,
    pub log_std: Vec<f64>,
}

/// Exploration noise around the policy mean: `a + clip(ε, -H, H)` with `ε ~ N(0, σ²)`.
///
/// `sigma` seeds the policy's initial standard deviation; `max_deviation` is `H`,
/// applied per action dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplorationConfig {
    pub sigma: f64,
    pub max_deviation: f64,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        Self {
            sigma: 0.3,
            max_deviation: 0.6,
        }
    }
}

impl ExplorationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("exploration sigma must be >= 0, got {}", self.sigma)));
        }
        if !(self.max_deviation > 0.0) {
            return Err(Error::Config(format!(
                "exploration max_deviation must be > 0, got {}",
                self.max_deviation
            )));
        }
        Ok(())
    }
}

/// Elementwise `base + clamp(noise, -H, H)`.
pub fn clip_exploration(base: &[f64], noise: &[f64], config: &ExplorationConfig) -> Result<Vec<f64>> {
    if base.len() != noise.len() {
        return Err(Error::Dimension {
            context: "clip_exploration",
            expected: base.len(),
            got: noise.len(),
        });
    }
    let h = config.max_deviation;
    Ok(base.iter().zip(noise).map(|(b, n)| b + n.clamp(-h, h)).collect())
}

/// Log density of `x` under independent normals `N(mean_i, exp(log_std_i)²)`.
pub fn gaussian_log_density(x: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    x.iter()
        .zip(mean)
        .zip(log_std)
        .map(|((x, m), s)| {
            let z = (x - m) / s.exp();
            -0.5 * z * z - s - HALF_LN_2PI
        })
        .sum()
}

impl GaussianPolicy {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        act_dim: usize,
        hidden: &[usize],
        init_std: f64,
        rng: &mut R,
    ) -> Self {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(obs_dim);
        sizes.extend_from_slice(hidden);
        sizes.push(act_dim);
        let mut policy = Self {
            mean_net: Mlp::new(&sizes, rng),
            log_std: vec![0.0; act_dim],
        };
        policy.reset_log_std(init_std);
        policy
    }

    pub fn obs_dim(&self) -> usize {
        self.mean_net.input_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.mean_net.output_dim()
    }

    /// Sets every dimension's standard deviation to `std` (clamped to the allowed range).
    pub fn reset_log_std(&mut self, std: f64) {
        let value = std.max(f64::MIN_POSITIVE).ln().clamp(LOG_STD_MIN, LOG_STD_MAX);
        self.log_std.iter_mut().for_each(|s| *s = value);
    }

    /// Overwrites the output-layer biases, which set the mean action for a zero hidden state.
    pub fn set_output_bias(&mut self, bias: f64) {
        let act = self.act_dim();
        let params = self.mean_net.params_mut();
        let n = params.len();
        params[n - act..].iter_mut().for_each(|b| *b = bias);
    }

    pub fn clamp_log_std(&mut self) {
        self.log_std
            .iter_mut()
            .for_each(|s| *s = s.clamp(LOG_STD_MIN, LOG_STD_MAX));
    }

    pub fn mean(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.mean_net.forward(obs)
    }

    pub fn std(&self) -> Vec<f64> {
        self.log_std.iter().map(|s| s.exp()).collect()
    }

    pub fn log_prob(&self, obs: &[f64], raw: &[f64]) -> Result<f64> {
        let mean = self.mean(obs)?;
        if raw.len() != mean.len() {
            return Err(Error::Dimension {
                context: "GaussianPolicy::log_prob",
                expected: mean.len(),
                got: raw.len(),
            });
        }
        Ok(gaussian_log_density(raw, &mean, &self.log_std))
    }

    /// Draws `raw = mean + σ ⊙ z` and returns it with its exact log density.
    pub fn sample_action<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Result<(Vec<f64>, f64)> {
        let mean = self.mean(obs)?;
        let raw: Vec<f64> = mean
            .iter()
            .zip(&self.log_std)
            .map(|(m, s)| {
                let z: f64 = rng.sample(StandardNormal);
                m + s.exp() * z
            })
            .collect();
        let logp = gaussian_log_density(&raw, &mean, &self.log_std);
        Ok((raw, logp))
    }

    /// Accumulates `weight · ∂ log π(raw | obs)/∂θ` into the mean-network and log-std buffers,
    /// returning the log density at the current parameters.
    pub fn accumulate_log_prob_grad(
        &self,
        obs: &[f64],
        raw: &[f64],
        weight: f64,
        net_grad: &mut [f64],
        log_std_grad: &mut [f64],
    ) -> Result<f64> {
        let trace = self.mean_net.forward_trace(obs)?;
        let mean = trace.output();
        if raw.len() != mean.len() {
            return Err(Error::Dimension {
                context: "GaussianPolicy log-prob gradient",
                expected: mean.len(),
                got: raw.len(),
            });
        }
        let logp = gaussian_log_density(raw, mean, &self.log_std);
        if weight != 0.0 {
            let mut d_mean = Vec::with_capacity(mean.len());
            for (i, ((x, m), s)) in raw.iter().zip(mean).zip(&self.log_std).enumerate() {
                let var = (2.0 * s).exp();
                let diff = x - m;
                d_mean.push(diff / var);
                log_std_grad[i] += weight * (diff * diff / var - 1.0);
            }
            self.mean_net.accumulate_backward(&trace, &d_mean, weight, net_grad)?;
        }
        Ok(logp)
    }
}
