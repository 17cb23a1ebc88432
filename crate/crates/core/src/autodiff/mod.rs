//! Reverse-mode automatic differentiation over small dense tensors.
//!
//! A [`Graph`] records every primitive as it is evaluated; [`Graph::backward`]
//! then sweeps the record in reverse. Broadcasting is limited to adding or
//! multiplying a single row across the rows of a matrix.

mod adagrad;
mod gradcheck;
mod graph;
mod tensor;

pub use adagrad::{clip_global_norm, Adagrad};
pub use gradcheck::grad_check;
pub use graph::{Graph, Var};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: {detail}")]
    InvalidArgument { op: &'static str, detail: String },
    #[error("{op}: produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("invalid tensor shape {0:?}")]
    InvalidShape(Vec<usize>),
    #[error("{len} values do not fill shape {shape:?}")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("backward needs a one-element loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("node {0} is not part of this graph")]
    UnknownVar(usize),
}
