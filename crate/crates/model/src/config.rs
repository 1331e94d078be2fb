use serde::{Deserialize, Serialize};

use crate::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Paper,
    Desk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d_model: usize,
    pub heads: usize,
    /// Code reader blocks.
    pub code_blocks: usize,
    /// AST reader blocks.
    pub ast_blocks: usize,
    /// Tree path reader blocks.
    pub path_blocks: usize,
    pub dropout: f64,
    /// Distinct anonymized local identifiers per method.
    pub max_locals: usize,
    /// Child slots with their own embedding; later slots share the last.
    pub max_slots: usize,
    /// Added to every sinusoidal position.
    pub position_offset: usize,
}

impl ModelConfig {
    pub fn preset(p: Preset) -> Self {
        match p {
            Preset::Paper => Self {
                d_model: 256,
                heads: 8,
                code_blocks: 5,
                ast_blocks: 9,
                path_blocks: 2,
                dropout: 0.1,
                max_locals: 32,
                max_slots: 8,
                position_offset: 0,
            },
            Preset::Desk => Self {
                d_model: 64,
                heads: 4,
                code_blocks: 2,
                ast_blocks: 3,
                path_blocks: 1,
                ..Self::preset(Preset::Paper)
            },
        }
    }

    /// A very small network for gradient checks and fuzzing.
    pub fn tiny() -> Self {
        Self {
            d_model: 8,
            heads: 2,
            code_blocks: 1,
            ast_blocks: 1,
            path_blocks: 1,
            dropout: 0.0,
            max_locals: 4,
            max_slots: 4,
            position_offset: 0,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads.max(1)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.d_model == 0 || self.heads == 0 || self.d_model % self.heads != 0 {
            return Err(ModelError::Config(format!(
                "d_model {} not divisible by {} heads",
                self.d_model, self.heads
            )));
        }
        if self.d_model % 2 != 0 {
            return Err(ModelError::Config("d_model must be even".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.max_slots == 0 {
            return Err(ModelError::Config("max_slots must be positive".into()));
        }
        Ok(())
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::preset(Preset::Desk)
    }
}
