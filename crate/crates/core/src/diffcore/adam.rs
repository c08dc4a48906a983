use ndarray::Zip;
use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, MlpParams};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Coupled L2 penalty: `weight_decay * theta` is added to the gradient
    /// before the moment updates.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |b: f64| b > 0.0 && b < 1.0;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !in_unit(self.beta1) || !in_unit(self.beta2) {
            return Err(Error::InvalidConfig(format!(
                "betas must lie in (0, 1), got {} and {}",
                self.beta1, self.beta2
            )));
        }
        if !(self.epsilon > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidConfig(
                "epsilon must be positive and weight decay non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Adam with bias correction for one network.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub step_count: u64,
    pub first_moment: Gradients,
    pub second_moment: Gradients,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(params: &MlpParams, config: AdamConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            step_count: 0,
            first_moment: params.zeros_like(),
            second_moment: params.zeros_like(),
            config,
        })
    }

    /// Applies one update in place. Parameters are left untouched when the
    /// gradient holds a non-finite entry.
    pub fn step(&mut self, params: &mut MlpParams, grads: &Gradients) -> Result<()> {
        if grads.weights.len() != params.weights.len() {
            return Err(Error::Shape(
                "gradient layer count differs from params".into(),
            ));
        }
        for (l, (g, w)) in grads.weights.iter().zip(&params.weights).enumerate() {
            if g.dim() != w.dim() || grads.biases[l].len() != params.biases[l].len() {
                return Err(Error::Shape(format!(
                    "gradient layer {l} has the wrong shape"
                )));
            }
        }
        if let Some(layer) = grads.first_non_finite_layer() {
            return Err(Error::NonFinite {
                layer,
                what: "gradient".into(),
            });
        }

        self.step_count += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            weight_decay,
        } = self.config;
        let t = self.step_count as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);

        let update = |theta: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            let g = g + weight_decay * *theta;
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *theta -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        };
        for l in 0..params.weights.len() {
            Zip::from(&mut params.weights[l])
                .and(&mut self.first_moment.weights[l])
                .and(&mut self.second_moment.weights[l])
                .and(&grads.weights[l])
                .for_each(|th, m, v, &g| update(th, m, v, g));
            Zip::from(&mut params.biases[l])
                .and(&mut self.first_moment.biases[l])
                .and(&mut self.second_moment.biases[l])
                .and(&grads.biases[l])
                .for_each(|th, m, v, &g| update(th, m, v, g));
        }
        Ok(())
    }
}
