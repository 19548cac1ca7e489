use crate::error::{Error, Result};
use crate::slice_env::AllocationAction;

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn check_len(raw: &[f64], slices: usize, domains: usize) -> Result<()> {
    if raw.len() != slices * domains {
        return Err(Error::Dimension {
            context: "project_action",
            expected: slices * domains,
            got: raw.len(),
        });
    }
    Ok(())
}

/// Raw value whose squash gives every one of `slices` slices a `1/(slices + 1)` share.
///
/// Starting policies here keeps every column strictly below capacity, away
/// from the renormalised region where the column total has no gradient.
pub fn initial_share_bias(slices: usize) -> f64 {
    logit(1.0 / (slices as f64 + 1.0))
}

/// Maps a raw slice-major vector onto a feasible allocation.
///
/// Each entry is squashed through the logistic map; any domain whose column
/// then sums above one is rescaled by the inverse of that sum.
pub fn project_action(raw: &[f64], slices: usize, domains: usize) -> Result<AllocationAction> {
    check_len(raw, slices, domains)?;
    let mut shares: Vec<f64> = raw.iter().map(|&x| logistic(x)).collect();
    for d in 0..domains {
        let total: f64 = (0..slices).map(|k| shares[k * domains + d]).sum();
        if total > 1.0 {
            for k in 0..slices {
                shares[k * domains + d] /= total;
            }
        }
    }
    AllocationAction::from_flat(slices, domains, shares)
}

/// Vector-Jacobian product of [`project_action`]: maps `∂L/∂shares` to `∂L/∂raw`.
pub fn project_action_vjp(raw: &[f64], slices: usize, domains: usize, upstream: &[f64]) -> Result<Vec<f64>> {
    check_len(raw, slices, domains)?;
    check_len(upstream, slices, domains)?;
    let squashed: Vec<f64> = raw.iter().map(|&x| logistic(x)).collect();
    let mut grad_sq = upstream.to_vec();
    for d in 0..domains {
        let total: f64 = (0..slices).map(|k| squashed[k * domains + d]).sum();
        if total > 1.0 {
            // a_i = s_i / S  ⇒  ∂L/∂s_j = g_j / S − Σ_i g_i s_i / S²
            let dot: f64 = (0..slices)
                .map(|k| upstream[k * domains + d] * squashed[k * domains + d])
                .sum();
            for k in 0..slices {
                let i = k * domains + d;
                grad_sq[i] = upstream[i] / total - dot / (total * total);
            }
        }
    }
    Ok(grad_sq
        .iter()
        .zip(&squashed)
        .map(|(g, s)| g * s * (1.0 - s))
        .collect())
}
