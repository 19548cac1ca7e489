use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fully-connected network: tanh on hidden layers, linear output.
///
/// Parameter layout, per layer `l` with fan-in `n` and fan-out `m`: the
/// weight matrix row-major as `[m][n]`, followed by `m` biases. Layers are
/// concatenated in order, giving `Σ (n + 1) · m` parameters in total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Activations recorded by [`Mlp::forward_trace`]; `activations[0]` is the input.
#[derive(Debug, Clone)]
pub struct Trace {
    pub activations: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace has at least the input")
    }
}

pub(crate) fn param_count(layer_sizes: &[usize]) -> usize {
    layer_sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

impl Mlp {
    /// Uniform Glorot initialisation of weights, zero biases.
    pub fn new<R: Rng + ?Sized>(layer_sizes: &[usize], rng: &mut R) -> Self {
        let mut net = Self::zeros(layer_sizes);
        let mut offset = 0;
        for w in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut net.params[offset..offset + fan_in * fan_out] {
                *p = rng.random_range(-limit..=limit);
            }
            offset += (fan_in + 1) * fan_out;
        }
        net
    }

    pub fn zeros(layer_sizes: &[usize]) -> Self {
        assert!(layer_sizes.len() >= 2, "an Mlp needs input and output sizes");
        assert!(layer_sizes.iter().all(|&s| s > 0), "layer sizes must be positive");
        Self {
            layer_sizes: layer_sizes.to_vec(),
            params: vec![0.0; param_count(layer_sizes)],
        }
    }

    pub fn from_params(layer_sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        let expected = param_count(layer_sizes);
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::Config(format!("invalid layer sizes {layer_sizes:?}")));
        }
        if params.len() != expected {
            return Err(Error::Dimension {
                context: "Mlp::from_params",
                expected,
                got: params.len(),
            });
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            params,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension {
                context: "Mlp input",
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(x)?.activations.pop().unwrap())
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<Trace> {
        self.check_input(x)?;
        let n_layers = self.layer_sizes.len() - 1;
        let mut activations = Vec::with_capacity(n_layers + 1);
        activations.push(x.to_vec());
        let mut offset = 0;
        for (l, w) in self.layer_sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + fan_in * fan_out];
            let biases = &self.params[offset + fan_in * fan_out..offset + (fan_in + 1) * fan_out];
            let input = &activations[l];
            let out: Vec<f64> = (0..fan_out)
                .map(|j| {
                    let row = &weights[j * fan_in..(j + 1) * fan_in];
                    let z = biases[j] + row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
                    if l + 1 < n_layers {
                        z.tanh()
                    } else {
                        z
                    }
                })
                .collect();
            activations.push(out);
            offset += (fan_in + 1) * fan_out;
        }
        Ok(Trace { activations })
    }

    /// Gradient of `upstream · f(x)` with respect to the parameters.
    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
        let trace = self.forward_trace(x)?;
        let mut grad = vec![0.0; self.params.len()];
        self.accumulate_backward(&trace, upstream, 1.0, &mut grad)?;
        Ok(grad)
    }

    /// Adds `scale · ∂(upstream · f)/∂θ` into `grad`, reusing a recorded forward pass.
    pub fn accumulate_backward(
        &self,
        trace: &Trace,
        upstream: &[f64],
        scale: f64,
        grad: &mut [f64],
    ) -> Result<()> {
        if upstream.len() != self.output_dim() {
            return Err(Error::Dimension {
                context: "Mlp upstream gradient",
                expected: self.output_dim(),
                got: upstream.len(),
            });
        }
        if grad.len() != self.params.len() {
            return Err(Error::Dimension {
                context: "Mlp gradient buffer",
                expected: self.params.len(),
                got: grad.len(),
            });
        }
        let n_layers = self.layer_sizes.len() - 1;
        let offsets: Vec<usize> = self
            .layer_sizes
            .windows(2)
            .scan(0, |acc, w| {
                let start = *acc;
                *acc += (w[0] + 1) * w[1];
                Some(start)
            })
            .collect();

        // delta holds ∂L/∂z for the current layer's pre-activations.
        let mut delta: Vec<f64> = upstream.iter().map(|g| g * scale).collect();
        for l in (0..n_layers).rev() {
            let (fan_in, fan_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let offset = offsets[l];
            let input = &trace.activations[l];
            for j in 0..fan_out {
                let d = delta[j];
                if d == 0.0 {
                    continue;
                }
                let row = &mut grad[offset + j * fan_in..offset + (j + 1) * fan_in];
                for (g, a) in row.iter_mut().zip(input) {
                    *g += d * a;
                }
                grad[offset + fan_in * fan_out + j] += d;
            }
            if l == 0 {
                break;
            }
            let weights = &self.params[offset..offset + fan_in * fan_out];
            let mut next = vec![0.0; fan_in];
            for j in 0..fan_out {
                let d = delta[j];
                if d == 0.0 {
                    continue;
                }
                for (n, w) in next.iter_mut().zip(&weights[j * fan_in..(j + 1) * fan_in]) {
                    *n += d * w;
                }
            }
            // input to layer l is tanh output of layer l-1
            for (n, a) in next.iter_mut().zip(input) {
                *n *= 1.0 - a * a;
            }
            delta = next;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_params_give_zero_output() {
        let net = Mlp::zeros(&[3, 5, 2]);
        assert_eq!(net.forward(&[1.0, -2.0, 0.3]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_single_layer() {
        let net = Mlp::from_params(&[1, 1], vec![1.0, 0.0]).unwrap();
        assert_eq!(net.forward(&[0.5]).unwrap(), vec![0.5]);
    }

    #[test]
    fn param_count_matches_layout() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::new(&[4, 64, 64, 3], &mut rng);
        assert_eq!(net.num_params(), 5 * 64 + 65 * 64 + 65 * 3);
    }

    #[test]
    fn linear_neuron_gradient() {
        let net = Mlp::from_params(&[1, 1], vec![0.7, -0.1]).unwrap();
        assert_eq!(net.backward(&[2.0], &[1.0]).unwrap(), vec![2.0, 1.0]);
    }

    #[test]
    fn zero_upstream_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::new(&[2, 4, 2], &mut rng);
        let g = net.backward(&[0.1, 0.2], &[0.0, 0.0]).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_errors() {
        let net = Mlp::zeros(&[2, 3]);
        assert!(matches!(net.forward(&[1.0]), Err(Error::Dimension { .. })));
        assert!(matches!(net.backward(&[1.0, 2.0], &[1.0]), Err(Error::Dimension { .. })));
        assert!(Mlp::from_params(&[2, 3], vec![0.0; 3]).is_err());
    }

    #[test]
    fn init_within_glorot_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = Mlp::new(&[10, 6], &mut rng);
        let limit = (6.0f64 / 16.0).sqrt();
        assert!(net.params()[..60].iter().all(|w| w.abs() <= limit));
        assert!(net.params()[60..].iter().all(|&b| b == 0.0));
    }
}
