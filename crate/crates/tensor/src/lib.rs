//! Reverse-mode automatic differentiation over dense row-major matrices,
//! plus the Adam optimizer and a flat checkpoint format.

mod adam;
pub mod checkpoint;
pub mod gradcheck;
mod graph;
mod params;
mod scalar;

pub use adam::Adam;
pub use graph::{softmax_in_place, Graph, Var};
pub use params::{Gradients, Init, ParamEntry, ParamId, ParamStore};
pub use scalar::Scalar;

#[derive(Debug, thiserror::Error)]
pub enum TensorError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("loss must be 1x1, got {0:?}")]
    NonScalarLoss((usize, usize)),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("duplicate parameter `{0}`")]
    DuplicateParam(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
