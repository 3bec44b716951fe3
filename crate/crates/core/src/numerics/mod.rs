//! Dense numeric core: tensors, parameters, a gradient tape and Adam.

mod adam;
pub mod checkpoint;
mod params;
mod tape;
mod tensor;

pub use adam::Adam;
pub use checkpoint::{Checkpoint, CheckpointError};
pub use params::{uniform, xavier_uniform, Param, ParamId, ParamStore};
pub use tape::{mlp_forward, Activation, Layer, Tape, Var};
pub use tensor::{argmax, softmax, Tensor};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericError {
    #[error("dimension error: {0}")]
    Shape(String),
    #[error("index error: {0}")]
    Index(String),
    #[error("numeric error: {0}")]
    NonFinite(String),
    #[error("usage error: {0}")]
    Usage(String),
}
