//! Pointer-generator summarization with coverage.
//!
//! The crate is organised bottom-up: [`autodiff`] supplies tensors, a
//! reverse-mode graph and Adagrad; [`corpus`] turns raw text into encoded
//! examples; [`model`] expresses the network on the graph; [`training`]
//! runs the optimisation loop and checkpoints; [`decoding`] generates
//! summaries; [`metrics`] scores them.

pub mod autodiff;
pub mod corpus;
pub mod fsio;
pub mod model;
pub mod training;
pub mod decoding;
pub mod metrics;
pub mod synthetic;
