//! The pointer-generator network with coverage, expressed on the
//! [`crate::autodiff`] graph.
//!
//! Every vector is a `1 x k` row. Per decoder step: an LSTM cell updates the
//! state `s_t`, attention over encoder states (optionally conditioned on the
//! coverage vector) yields a context vector, and the output distribution
//! mixes the vocabulary softmax with copied attention mass.

mod network;
mod params;

use thiserror::Error;

pub use network::{
    attention, context, coverage_loss, decoder_step, decoder_step_embedded, embed, encode, encode_batch_item,
    example_loss, final_dist, gen_prob, initial_coverage, lstm_cell, sequence_loss, step_loss, vocab_dist,
    EncoderOutput, LstmState, StepOutput, PROB_FLOOR, P_GEN_FLOOR,
};
pub use params::{Bound, Lstm, ModelDims, ModelParams, COVERAGE_WEIGHT};

use crate::autodiff::AutodiffError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("input has no unmasked positions")]
    EmptyInput,
    #[error("no target tokens to score")]
    EmptyTarget,
    #[error("missing parameter `{0}`")]
    MissingParam(String),
    #[error("unexpected parameter `{0}`")]
    UnknownParam(String),
    #[error("parameter `{name}` has shape {found:?}, expected {expected:?}")]
    ParamShape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("parameter `{0}` contains non-finite values")]
    NonFiniteParam(String),
}
