use serde::{Deserialize, Serialize};

use editrepair_model::{ModelConfig, Preset};

/// Training hyperparameters. Missing keys in a config file take defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub preset: Preset,
    /// Defaults to 1e-4 for the paper preset and 1e-3 for the desk preset.
    pub lr: Option<f64>,
    pub dropout: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Identifiers and literals seen more often than this in fixes get
    /// their own productions.
    pub threshold: usize,
    /// Global gradient-norm clip; 0 disables clipping.
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            preset: Preset::Desk,
            lr: None,
            dropout: 0.1,
            batch_size: 16,
            epochs: 10,
            seed: 0,
            threshold: 10,
            clip_norm: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn learning_rate(&self) -> f64 {
        self.lr.unwrap_or(match self.preset {
            Preset::Paper => 1e-4,
            Preset::Desk => 1e-3,
        })
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            dropout: self.dropout,
            ..ModelConfig::preset(self.preset)
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let lr = self.learning_rate();
        if !(lr.is_finite() && lr > 0.0) {
            return Err(format!("learning rate must be positive, got {lr}"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err("batch_size and epochs must be positive".into());
        }
        if !(self.clip_norm >= 0.0) {
            return Err("clip_norm must be non-negative".into());
        }
        Ok(())
    }
}
