use crate::error::{Error, Result};
use crate::mdp::Transition;
use crate::neural::GaussianPolicy;

#[derive(Debug, Clone)]
pub struct SurrogateOutput {
    pub loss: f64,
    pub net_grad: Vec<f64>,
    pub log_std_grad: Vec<f64>,
    /// Fraction of samples whose ratio fell outside `[1 − ε, 1 + ε]`.
    pub clip_fraction: f64,
}

/// Clipped surrogate `−mean(min(ρA, clip(ρ, 1−ε, 1+ε)A)) − β·H(π)` and its gradient.
///
/// `ρ = exp(log π(a|s) − old_logp)`. Only samples whose unclipped term is the
/// active minimum contribute gradient.
pub fn surrogate_loss(
    policy: &GaussianPolicy,
    batch: &[&Transition],
    old_logp: &[f64],
    advantages: &[f64],
    clip_eps: f64,
    entropy_coef: f64,
) -> Result<SurrogateOutput> {
    if old_logp.len() != batch.len() || advantages.len() != batch.len() {
        return Err(Error::Dimension {
            context: "surrogate batch",
            expected: batch.len(),
            got: old_logp.len().min(advantages.len()),
        });
    }
    let mut net_grad = vec![0.0; policy.mean_net.num_params()];
    let mut log_std_grad = vec![0.0; policy.act_dim()];
    if batch.is_empty() {
        return Ok(SurrogateOutput {
            loss: 0.0,
            net_grad,
            log_std_grad,
            clip_fraction: 0.0,
        });
    }
    let n = batch.len() as f64;
    let mut objective = 0.0;
    let mut clipped = 0usize;
    for ((t, &old), &adv) in batch.iter().zip(old_logp).zip(advantages) {
        let logp = policy.log_prob(&t.state_vec, &t.action_vec)?;
        let ratio = (logp - old).exp();
        if !ratio.is_finite() {
            return Err(Error::NonFinite("importance ratio"));
        }
        let clipped_ratio = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps);
        if clipped_ratio != ratio {
            clipped += 1;
        }
        let unclipped_term = ratio * adv;
        let clipped_term = clipped_ratio * adv;
        objective += unclipped_term.min(clipped_term);
        if unclipped_term <= clipped_term && adv != 0.0 {
            // ∂(ρA)/∂θ = ρA ∂logπ/∂θ; loss carries a −1/n factor.
            policy.accumulate_log_prob_grad(
                &t.state_vec,
                &t.action_vec,
                -unclipped_term / n,
                &mut net_grad,
                &mut log_std_grad,
            )?;
        }
    }
    // Entropy of a diagonal Gaussian is Σ log σ + const.
    let entropy: f64 = policy.log_std.iter().sum::<f64>()
        + 0.5 * policy.act_dim() as f64 * (1.0 + (2.0 * std::f64::consts::PI).ln());
    if entropy_coef != 0.0 {
        log_std_grad.iter_mut().for_each(|g| *g -= entropy_coef);
    }
    Ok(SurrogateOutput {
        loss: -objective / n - entropy_coef * entropy,
        net_grad,
        log_std_grad,
        clip_fraction: clipped as f64 / n,
    })
}
