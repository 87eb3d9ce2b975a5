//! Trainable-model machinery shared by both enhancement stages: a
//! fixed-architecture multilayer perceptron with hand-written
//! backpropagation, the two loss functions (binary cross-entropy and
//! weighted MSE), and an AdamW optimizer.
//!
//! Everything is 64-bit, seeded, and summed in input order, so training
//! runs are bit-reproducible.

mod loss;
mod mlp;
mod optim;

pub use loss::{bce_loss, wmse_loss, wmse_weights, WmseConfig};
pub use mlp::{Activation, Gradients, Mlp, TapedForward};
pub use optim::{AdamW, AdamWConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("input length {got} does not match expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("loss over empty input")]
    EmptyInput,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid loss weighting config: {0}")]
    BadConfig(String),
    #[error("malformed model checkpoint: {0}")]
    BadCheckpoint(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
