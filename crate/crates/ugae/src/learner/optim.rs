//! Adaptive-moment optimizer with decoupled weight decay.

use super::{Gradients, Mlp};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// AdamW state: first/second moment per parameter plus the step counter.
/// Updates are elementwise and applied in a fixed parameter order, so two
/// runs fed identical gradients produce bit-identical trajectories.
#[derive(Debug, Clone)]
pub struct AdamW {
    config: AdamWConfig,
    step: u64,
    m: Gradients,
    v: Gradients,
}

impl AdamW {
    pub fn new(config: AdamWConfig, model: &Mlp) -> Self {
        Self {
            config,
            step: 0,
            m: Gradients::zeros_like(model),
            v: Gradients::zeros_like(model),
        }
    }

    pub fn config(&self) -> &AdamWConfig {
        &self.config
    }

    /// One update: θ ← θ − lr · (m̂ / (√v̂ + ε) + weight_decay · θ) with
    /// bias-corrected moments m̂, v̂. Decay applies to every parameter.
    pub fn step(&mut self, model: &mut Mlp, grads: &Gradients) {
        self.step += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        model.for_each_param(
            &mut [&mut self.m, &mut self.v],
            grads,
            |theta, g, slots| {
                let [m, v] = slots else { unreachable!() };
                **m = c.beta1 * **m + (1.0 - c.beta1) * g;
                **v = c.beta2 * **v + (1.0 - c.beta2) * g * g;
                let m_hat = **m / bc1;
                let v_hat = **v / bc2;
                *theta -= c.lr * (m_hat / (v_hat.sqrt() + c.eps) + c.weight_decay * *theta);
            },
        );
    }
}
