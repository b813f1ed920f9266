//! Trapezoidal integration weights over an observation grid.
//!
//! `Σ_j ω_j f(t_j)` approximates `∫_{t_1}^{t_J} f(t) dt`. Every subject gets
//! weights from its own timestamps, which is what lets irregularly observed
//! curves share one feature layer.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureWeights {
    times: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureWeights {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `Σ_j ω_j values[j]`.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.weights.len() {
            return Err(Error::arg("integrand length must match the grid"));
        }
        Ok(self.weights.iter().zip(values).map(|(w, v)| w * v).sum())
    }
}

/// Trapezoid weights: `ω_1 = (t_2 - t_1)/2`, `ω_J = (t_J - t_{J-1})/2`,
/// `ω_j = (t_{j+1} - t_{j-1})/2` in between.
pub fn trapezoid_weights(times: &[f64]) -> Result<QuadratureWeights> {
    let n = times.len();
    if n < 2 {
        return Err(Error::arg("trapezoid rule needs at least two time points"));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::arg("time points must be finite"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::arg("time points must be strictly increasing"));
    }
    let mut weights = Vec::with_capacity(n);
    weights.push(0.5 * (times[1] - times[0]));
    for j in 1..n - 1 {
        weights.push(0.5 * (times[j + 1] - times[j - 1]));
    }
    weights.push(0.5 * (times[n - 1] - times[n - 2]));
    Ok(QuadratureWeights {
        times: times.to_vec(),
        weights,
    })
}
