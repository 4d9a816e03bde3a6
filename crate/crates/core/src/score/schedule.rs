use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Variance-exploding noise schedule σ(t) = σ_min·(σ_max/σ_min)^t on t ∈ [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSchedule {
    sigma_min: f64,
    sigma_max: f64,
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self {
            sigma_min: 0.01,
            sigma_max: 10.0,
        }
    }
}

impl NoiseSchedule {
    pub fn new(sigma_min: f64, sigma_max: f64) -> Result<Self> {
        if !(sigma_min > 0.0) || !(sigma_max > sigma_min) || !sigma_max.is_finite() {
            return Err(Error::invalid(format!(
                "noise schedule needs 0 < sigma_min < sigma_max, got ({sigma_min}, {sigma_max})"
            )));
        }
        Ok(Self { sigma_min, sigma_max })
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    pub fn sigma_at(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::invalid(format!("time {t} outside [0, 1]")));
        }
        Ok(self.sigma(t))
    }

    #[inline]
    pub(crate) fn sigma(&self, t: f64) -> f64 {
        self.sigma_min * (self.sigma_max / self.sigma_min).powf(t)
    }

    /// ln(σ_max/σ_min).
    pub fn log_ratio(&self) -> f64 {
        (self.sigma_max / self.sigma_min).ln()
    }

    /// Diffusion coefficient of the forward SDE dx = g(t) dW, chosen so that
    /// d[σ²]/dt = g², i.e. g(t) = σ(t)·√(2·ln(σ_max/σ_min)).
    pub fn diffusion(&self, t: f64) -> f64 {
        self.sigma(t) * (2.0 * self.log_ratio()).sqrt()
    }

    /// `levels` noise levels spaced geometrically from σ_max down to σ_min.
    pub fn ladder(&self, levels: usize) -> Vec<f64> {
        match levels {
            0 => Vec::new(),
            1 => vec![self.sigma_max],
            _ => (0..levels)
                .map(|i| self.sigma(1.0 - i as f64 / (levels - 1) as f64))
                .collect(),
        }
    }
}
