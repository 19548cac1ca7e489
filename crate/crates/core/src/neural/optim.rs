use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

/// Per-parameter-vector optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    kind: OptimizerKind,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, num_params: usize) -> Self {
        let (m, v) = match kind {
            OptimizerKind::Adam => (vec![0.0; num_params], vec![0.0; num_params]),
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
        };
        Self {
            kind,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m,
            v,
            t: 0,
        }
    }

    pub fn adam(num_params: usize) -> Self {
        Self::new(OptimizerKind::Adam, num_params)
    }

    pub fn sgd() -> Self {
        Self::new(OptimizerKind::Sgd, 0)
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn steps(&self) -> u64 {
        self.t
    }
}

/// One descent step `params ← params − lr · update(grads)`.
///
/// A non-finite gradient leaves both the parameters and the optimizer state untouched.
pub fn grad_step(params: &mut [f64], grads: &[f64], state: &mut Optimizer, lr: f64) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::Dimension {
            context: "grad_step",
            expected: params.len(),
            got: grads.len(),
        });
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    match state.kind {
        OptimizerKind::Sgd => {
            for (p, g) in params.iter_mut().zip(grads) {
                *p -= lr * g;
            }
        }
        OptimizerKind::Adam => {
            if state.m.len() != params.len() {
                return Err(Error::Dimension {
                    context: "Adam state",
                    expected: state.m.len(),
                    got: params.len(),
                });
            }
            state.t += 1;
            let bc1 = 1.0 - state.beta1.powi(state.t as i32);
            let bc2 = 1.0 - state.beta2.powi(state.t as i32);
            for i in 0..params.len() {
                let g = grads[i];
                state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
                state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
                let m_hat = state.m[i] / bc1;
                let v_hat = state.v[i] / bc2;
                params[i] -= lr * m_hat / (v_hat.sqrt() + state.eps);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        for mut opt in [Optimizer::sgd(), Optimizer::adam(3)] {
            let mut p = vec![1.0, -2.0, 0.5];
            grad_step(&mut p, &[0.0; 3], &mut opt, 0.1).unwrap();
            assert_eq!(p, vec![1.0, -2.0, 0.5]);
        }
    }

    #[test]
    fn sgd_step() {
        let mut p = vec![1.0];
        grad_step(&mut p, &[1.0], &mut Optimizer::sgd(), 0.1).unwrap();
        assert!((p[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_has_magnitude_lr() {
        // m̂ = g, v̂ = g² at t = 1, so the step is lr · g / (|g| + eps).
        for g in [1e-3, 0.5, 40.0, -7.0] {
            let mut p = vec![0.0];
            grad_step(&mut p, &[g], &mut Optimizer::adam(1), 0.01).unwrap();
            let expected = 0.01 * g.abs() / (g.abs() + 1e-8);
            assert!((p[0].abs() - expected).abs() < 1e-12);
            assert!((p[0].abs() - 0.01).abs() < 1e-6);
        }
    }

    #[test]
    fn non_finite_gradient_rejected_without_side_effects() {
        let mut opt = Optimizer::adam(2);
        let mut p = vec![1.0, 2.0];
        let err = grad_step(&mut p, &[f64::NAN, 0.0], &mut opt, 0.1).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
        assert_eq!(p, vec![1.0, 2.0]);
        assert_eq!(opt.steps(), 0);
    }
}
