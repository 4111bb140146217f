use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Architecture, optimizer and data-window settings for the forecaster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Days of history the encoder sees.
    pub context_len: usize,
    /// Days forecast in one decoder pass.
    pub horizon: usize,
    pub lags: Vec<usize>,
    pub d_model: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub heads: usize,
    pub ff_dim: usize,
    pub dropout: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub epochs: usize,
    /// Early-stopping patience in epochs without validation improvement.
    pub patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
    /// Number of features kept by mutual-information selection.
    pub selected_feature_count: usize,
    /// Forecast targets by feature name. Empty means every emotion mean and
    /// every platform's raw volume.
    pub targets: Vec<String>,
    /// Lower bound added to the scale head.
    pub sigma_floor: f64,
    /// Lower bound added (on top of 2) to the degrees-of-freedom head.
    pub nu_floor: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            context_len: 28,
            horizon: 7,
            lags: vec![1, 2, 3],
            d_model: 64,
            encoder_layers: 2,
            decoder_layers: 2,
            heads: 4,
            ff_dim: 128,
            dropout: 0.3,
            batch_size: 2,
            learning_rate: 3e-4,
            weight_decay: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            epochs: 30,
            patience: 10,
            validation_fraction: 0.2,
            seed: 0,
            selected_feature_count: 64,
            targets: Vec::new(),
            sigma_floor: 1e-3,
            nu_floor: 1e-2,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let max_lag = self.lags.iter().copied().max().unwrap_or(0);
        let checks: [(bool, String); 9] = [
            (
                self.context_len > max_lag,
                format!("context_len {} must be >= max lag + 1", self.context_len),
            ),
            (self.horizon >= 1, "horizon must be >= 1".into()),
            (self.lags.iter().all(|&l| l >= 1), "lags must be >= 1".into()),
            (
                (0.0..1.0).contains(&self.dropout),
                format!("dropout {} outside [0, 1)", self.dropout),
            ),
            (
                self.heads >= 1 && self.d_model.is_multiple_of(self.heads),
                format!("d_model {} not divisible by heads {}", self.d_model, self.heads),
            ),
            (self.batch_size >= 1, "batch_size must be >= 1".into()),
            (
                self.learning_rate >= 0.0 && self.weight_decay >= 0.0,
                "learning rate and weight decay must be >= 0".into(),
            ),
            (
                self.validation_fraction >= 0.0 && self.validation_fraction < 1.0,
                "validation_fraction outside [0, 1)".into(),
            ),
            (
                self.sigma_floor > 0.0 && self.nu_floor > 0.0,
                "sigma_floor and nu_floor must be > 0".into(),
            ),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::invalid(msg));
            }
        }
        if self.selected_feature_count == 0 {
            return Err(Error::invalid("selected_feature_count must be >= 1"));
        }
        Ok(())
    }
}
