use serde::{Deserialize, Serialize};

use super::{Layer, Network, ParamGrads};
use crate::error::{DpiError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment accumulators for Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    config: AdamConfig,
    first_moment: Vec<Layer>,
    second_moment: Vec<Layer>,
    step_count: u64,
}

impl AdamState {
    pub fn new(net: &Network, config: AdamConfig) -> Self {
        let zeros = ParamGrads::zeros_like(net).layers;
        Self {
            config,
            first_moment: zeros.clone(),
            second_moment: zeros,
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn config(&self) -> AdamConfig {
        self.config
    }

    pub fn second_moment_flat(&self) -> Vec<f64> {
        super::flatten_layers(&self.second_moment)
    }

    /// Applies one update in place. Non-finite gradients leave both the
    /// network and the state untouched.
    pub fn step(&mut self, net: &mut Network, grads: &ParamGrads, lr: f64) -> Result<()> {
        if grads.layers.len() != self.first_moment.len()
            || grads
                .layers
                .iter()
                .zip(&self.first_moment)
                .any(|(g, m)| g.weight.dim() != m.weight.dim() || g.bias.len() != m.bias.len())
        {
            return Err(DpiError::Usage("gradient shape does not match parameters".into()));
        }
        if !grads.is_finite() {
            return Err(DpiError::Numeric("non-finite parameter gradient".into()));
        }
        self.step_count += 1;
        let AdamConfig {
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step_count as i32);
        let bc2 = 1.0 - beta2.powi(self.step_count as i32);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + epsilon);
        };
        for (((layer, g), m), v) in net
            .layers_mut()
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            ndarray::Zip::from(&mut layer.weight)
                .and(&g.weight)
                .and(&mut m.weight)
                .and(&mut v.weight)
                .for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(&mut layer.bias)
                .and(&g.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
        if !net.is_finite() {
            return Err(DpiError::Numeric("Adam step produced a non-finite parameter".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Activation;
    use ndarray::{Array1, Array2};

    fn scalar_net(w: f64) -> Network {
        // 1 -> 1 -> 1 is the smallest legal shape; only the first weight matters here.
        Network::from_layers(
            2,
            vec![
                Layer {
                    weight: Array2::from_elem((1, 2), w),
                    bias: Array1::zeros(1),
                },
                Layer {
                    weight: Array2::from_elem((1, 1), w),
                    bias: Array1::zeros(1),
                },
            ],
            Activation::Tanh,
        )
        .unwrap()
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut net = scalar_net(0.5);
        let mut state = AdamState::new(&net, AdamConfig::default());
        let mut grads = ParamGrads::zeros_like(&net);
        grads.layers[0].weight[[0, 0]] = 1.0;
        let before = net.params_flat();
        state.step(&mut net, &grads, 1e-3).unwrap();
        let after = net.params_flat();
        // m_hat = 1, v_hat = 1: delta = -lr / (1 + eps).
        let expected = -1e-3 / (1.0 + 1e-8);
        assert!((after[0] - before[0] - expected).abs() < 1e-18);
        assert_eq!(after[1..], before[1..]);
        assert_eq!(state.step_count(), 1);
        assert!(state.second_moment_flat().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut net = scalar_net(0.3);
        let mut state = AdamState::new(&net, AdamConfig::default());
        let before = net.clone();
        state.step(&mut net, &ParamGrads::zeros_like(&before), 1e-3).unwrap();
        assert_eq!(net, before);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut net = scalar_net(0.3);
        let mut state = AdamState::new(&net, AdamConfig::default());
        let mut grads = ParamGrads::zeros_like(&net);
        grads.layers[1].bias[0] = f64::NAN;
        let before = net.clone();
        assert!(matches!(state.step(&mut net, &grads, 1e-3), Err(DpiError::Numeric(_))));
        assert_eq!(net, before);
        assert_eq!(state.step_count(), 0);
    }
}
