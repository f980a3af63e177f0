//! Small dense-network engine in double precision.

mod loss;
mod matrix;
mod model;
mod network;
mod optim;
mod train;

use thiserror::Error;

pub use loss::{LossKind, BCE_EPSILON};
pub use matrix::Matrix;
pub use model::{LayerDocument, ModelDocument, ModelMeta};
pub use network::{sigmoid, Activation, DenseLayer, ForwardPass, LayerGradient, Network};
pub use optim::{zero_gradients, OptimizerConfig, OptimizerKind, OptimizerSpec, OptimizerState};
pub use train::{fit, steps_per_epoch, Dataset, TrainConfig, TrainHistory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("network has no layers")]
    EmptyNetwork,
    #[error("layer width must be positive")]
    ZeroWidth,
    #[error("gradient contains NaN or infinity")]
    NonFiniteGradient,
    #[error("parameters contain NaN or infinity")]
    NonFiniteParameter,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("model document: {0}")]
    Model(String),
}
