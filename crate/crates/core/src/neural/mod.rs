//! A minimal differentiable computation engine: dense tensors, a small layer
//! zoo (2-D convolution, dense, leaky-ReLU, ReLU, dropout, flatten), MSE and
//! cross-entropy losses, adaptive-moment optimization, and exact gradients
//! with respect to both parameters and inputs.
//!
//! Everything runs on the CPU in `f64`. Forward passes on immutable networks
//! are pure and thread-safe; training mutates a single network instance.

mod network;
mod tensor;
mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use network::{ForwardTape, Gradients, LayerSpec, Network, NetworkSpec};
pub use tensor::Tensor;
pub use train::{
    backward, classification_accuracy, evaluate_loss, holdout_split, loss_and_grad, softmax,
    train, AdamState, LossKind, Target, TrainConfig, TrainingReport,
};

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
}

/// Self-describing model file: the layer spec, flat parameters, the init
/// seed, and free-form training metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub network: Network,
    pub metadata: serde_json::Value,
}

impl Checkpoint {
    pub fn new(network: Network, metadata: serde_json::Value) -> Self {
        Checkpoint { network, metadata }
    }

    pub fn save(&self, path: &Path) -> Result<(), NeuralError> {
        let text = serde_json::to_string(self).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| NeuralError::Checkpoint(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, NeuralError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| NeuralError::Checkpoint(e.to_string()))
    }
}
