//! Dense tensors and a reverse-mode tape over coarse primitives.
//!
//! A [`Tape`] records one forward pass. Each primitive stores its output
//! value and whatever its backward rule needs; [`Tape::backward`] then sweeps
//! the nodes in reverse once and returns the gradient of a scalar loss with
//! respect to every registered parameter.

mod gradcheck;
pub mod kernels;
mod tape;
mod tensor;

use thiserror::Error;

use crate::activations::ActivationError;

pub use gradcheck::{gradcheck, relative_error, GradcheckReport};
pub use tape::{Gradients, ParamId, Tape, Var};
pub use tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("shape {shape:?} does not match data length {len}")]
    BadLength { shape: Vec<usize>, len: usize },
    #[error("expected a rank-{expected} tensor, got shape {shape:?}")]
    Rank { expected: usize, shape: Vec<usize> },
    #[error("expected a single-element tensor, got shape {shape:?}")]
    NotScalar { shape: Vec<usize> },
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
    #[error("backward called without a recorded forward pass for this node")]
    BackwardWithoutForward,
    #[error("tape has already been backpropagated; record a new forward pass")]
    AlreadyBackpropagated,
    #[error("parameter {0:?} registered twice on the same tape")]
    DuplicateParam(ParamId),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("invalid argument to {op}: {detail}")]
    InvalidArgument { op: &'static str, detail: String },
    #[error(transparent)]
    Activation(#[from] ActivationError),
}

pub type Result<T> = std::result::Result<T, EngineError>;
