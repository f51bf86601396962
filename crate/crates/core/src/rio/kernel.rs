//! The input/output kernel of the residual GP. Similarity between two
//! forecasts is measured both in the network's feature space (the final
//! hidden state) and in the prediction itself, each through a squared
//! exponential with its own variance and length scale:
//!
//! k(a, b) = sigma_in^2  * exp(-||g_a - g_b||^2 / (2 l_in^2))
//!         + sigma_out^2 * exp(-(y_a - y_b)^2   / (2 l_out^2))

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IoKernelHyper {
    pub sigma_in: f64,
    pub len_in: f64,
    pub sigma_out: f64,
    pub len_out: f64,
    /// Observation noise standard deviation added (squared) to the
    /// training diagonal only; never part of cross-covariances.
    pub noise_sd: f64,
}

impl IoKernelHyper {
    pub fn validate(&self) -> Result<()> {
        let ok = self.sigma_in >= 0.0
            && self.sigma_out >= 0.0
            && self.len_in > 0.0
            && self.len_out > 0.0
            && self.noise_sd >= 0.0
            && [
                self.sigma_in,
                self.len_in,
                self.sigma_out,
                self.len_out,
                self.noise_sd,
            ]
            .iter()
            .all(|v| v.is_finite());
        if !ok {
            return Err(Error::InvalidConfig(format!(
                "kernel hyperparameters invalid: {self:?}"
            )));
        }
        Ok(())
    }

    /// Prior variance at any single point: k(x, x) without noise.
    pub fn prior_variance(&self) -> f64 {
        self.sigma_in * self.sigma_in + self.sigma_out * self.sigma_out
    }
}

/// Kernel between two (feature, prediction) pairs.
pub fn io_kernel(
    g_a: &[f64],
    y_a: f64,
    g_b: &[f64],
    y_b: f64,
    hyper: &IoKernelHyper,
) -> Result<f64> {
    if g_a.len() != g_b.len() {
        return Err(Error::ShapeMismatch {
            what: "kernel feature vectors",
            expected: g_a.len(),
            got: g_b.len(),
        });
    }
    Ok(io_kernel_from_d2(
        squared_distance(g_a, g_b),
        (y_a - y_b) * (y_a - y_b),
        hyper,
    ))
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
}

/// Kernel from precomputed squared distances; the fit loop reuses cached
/// distances across hyperparameter evaluations.
pub(crate) fn io_kernel_from_d2(d2_g: f64, d2_y: f64, hyper: &IoKernelHyper) -> f64 {
    let input = hyper.sigma_in * hyper.sigma_in
        * (-d2_g / (2.0 * hyper.len_in * hyper.len_in)).exp();
    let output = hyper.sigma_out * hyper.sigma_out
        * (-d2_y / (2.0 * hyper.len_out * hyper.len_out)).exp();
    input + output
}
