//! Neural edit decoder: code, AST and tree path readers feeding a rule
//! predictor, a tree copier and a subtree locator, weighted by a decider.

pub mod beam;
pub mod config;
pub mod decoder;
pub mod features;
pub mod layers;
pub mod model;
pub mod readers;

pub use beam::{beam_search, greedy, search, BeamConfig, Candidate};
pub use config::{ModelConfig, Preset};
pub use decoder::{Hypothesis, Session, StepScores};
pub use features::{CodeInput, Tag, TokenVocab};
pub use model::{Hyperparameters, Model};
pub use readers::{Prepared, PrepareError};

use editrepair_core::edit::EditError;
use editrepair_tensor::TensorError;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Edit(#[from] EditError),
    #[error(transparent)]
    Prepare(#[from] PrepareError),
}
