//! Adam optimizer over a flat parameter vector, with bias-corrected moment
//! estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if !ok {
            return Err(Error::InvalidConfig(format!(
                "adam configuration invalid: lr {}, beta1 {}, beta2 {}, eps {}",
                self.learning_rate, self.beta1, self.beta2, self.epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct AdamState {
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(param_count: usize) -> Self {
        AdamState {
            step: 0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
        }
    }

    /// One update step in place. First step moves each parameter by roughly
    /// `learning_rate` in the negative gradient direction (bias correction
    /// makes m-hat equal the gradient at step 1).
    pub fn apply(&mut self, cfg: &AdamConfig, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::ShapeMismatch {
                what: "adam parameter vector",
                expected: self.m.len(),
                got: params.len().min(grads.len()),
            });
        }
        self.step += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.step as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.step as i32);
        for j in 0..params.len() {
            let g = grads[j];
            self.m[j] = cfg.beta1 * self.m[j] + (1.0 - cfg.beta1) * g;
            self.v[j] = cfg.beta2 * self.v[j] + (1.0 - cfg.beta2) * g * g;
            let m_hat = self.m[j] / bc1;
            let v_hat = self.v[j] / bc2;
            params[j] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
        Ok(())
    }

    pub fn first_moments(&self) -> &[f64] {
        &self.m
    }
}
