//! Dense feed-forward networks with analytic gradients and Adam.
//!
//! Batches are row-major `B x width` matrices. Parameter gradients are the
//! mean over the batch of the per-row gradients; the gradient that flows
//! back to the network input stays per row so networks can be chained.

mod activation;
mod adam;
mod init;
mod layer;
mod loss;

pub use activation::{lrelu, sigmoid, Activation, SIGMOID_CLAMP};
pub use adam::AdamState;
pub use init::{glorot_init, glorot_init_with};
pub use layer::{ActivationTrace, DenseLayer, Gradients, LayerGradient, Mlp};
pub use loss::{cross_entropy_loss, mse_loss, LossValue, PROB_CLIP};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("shape mismatch at layer {layer}: expected width {expected}, got {actual}")]
    Shape {
        layer: usize,
        expected: usize,
        actual: usize,
    },
    #[error("shape mismatch: {0}")]
    Mismatch(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("target block {block} is not one-hot")]
    InvalidTarget { block: usize },
}
