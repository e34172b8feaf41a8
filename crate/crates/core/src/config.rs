use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{KernelConfig, KernelConvention};

/// Every bandwidth and weight used by the metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Diversity-entropy bandwidth.
    pub sigma_global: f64,
    /// Intra-task bandwidth used by memorization ease and spatial coverage.
    pub sigma_task: f64,
    /// Bandwidth of the task-centroid transfer kernel.
    pub sigma_center: f64,
    /// Scaling of the task priors.
    pub sigma_model: f64,
    /// Weight of expressiveness against memorization ease.
    pub beta: f64,
    pub kernel_convention: KernelConvention,
    /// Guard added inside logarithms.
    pub epsilon: f64,
    /// Overrides the tanh scale of spatial coverage; `sigma_task` when unset.
    #[serde(default)]
    pub spatial_scale: Option<f64>,
    /// Below this total variance a task's expressiveness is 0.
    pub variance_floor: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            sigma_global: 0.1,
            sigma_task: 0.001,
            sigma_center: 0.01,
            sigma_model: 0.02,
            beta: 0.5,
            kernel_convention: KernelConvention::Unnormalized,
            epsilon: 1e-12,
            spatial_scale: None,
            variance_floor: 1e-18,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sigma_global", self.sigma_global),
            ("sigma_task", self.sigma_task),
            ("sigma_center", self.sigma_center),
            ("sigma_model", self.sigma_model),
            ("spatial_scale", self.spatial_scale.unwrap_or(1.0)),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidParameter(format!(
                "beta must lie in [0, 1], got {}",
                self.beta
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1e-6) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, 1e-6], got {}",
                self.epsilon
            )));
        }
        if !(self.variance_floor >= 0.0) {
            return Err(Error::InvalidParameter("variance_floor must be >= 0".into()));
        }
        Ok(())
    }

    pub fn diversity_kernel(&self) -> KernelConfig {
        KernelConfig {
            sigma: self.sigma_global,
            convention: self.kernel_convention,
        }
    }

    pub fn spatial_scale(&self) -> f64 {
        self.spatial_scale.unwrap_or(self.sigma_task)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let hp = Hyperparams::default();
        hp.validate().unwrap();
        assert_eq!(hp.beta, 0.5);
        assert_eq!(hp.sigma_model, 0.02);
        assert_eq!(hp.sigma_task, 0.001);
        assert_eq!(hp.sigma_center, 0.01);
        assert_eq!(hp.sigma_global, 0.1);
    }

    #[test]
    fn rejects_bad_values() {
        let bad = [
            Hyperparams { beta: 1.5, ..Default::default() },
            Hyperparams { sigma_task: 0.0, ..Default::default() },
            Hyperparams { epsilon: 1e-3, ..Default::default() },
            Hyperparams { sigma_global: f64::NAN, ..Default::default() },
        ];
        for hp in bad {
            assert!(hp.validate().is_err(), "{hp:?}");
        }
    }
}
