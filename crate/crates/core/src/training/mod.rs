//! Training from scratch, fine-tuning, validation and checkpoint files.

mod checkpoint;
mod config;
mod trainer;

use thiserror::Error;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CheckpointError,
    CheckpointMeta, FORMAT_VERSION, MAGIC,
};
pub use config::{TrainingConfig, MIN_COVERAGE_STEPS};
pub use trainer::{curve_csv, finetune, train, train_step, validate, validate_checkpoint, CurvePoint, Init, TrainOutcome};

use crate::autodiff::AutodiffError;
use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("non-finite loss at step {step}; last good checkpoint is at step {}", last_good.meta.step)]
    NonFinite { step: usize, last_good: Box<Checkpoint> },
    #[error("checkpoint vocabulary {checkpoint} does not match corpus vocabulary {corpus}")]
    VocabMismatch { checkpoint: String, corpus: String },
    #[error("incompatible dimensions: {0}")]
    DimsMismatch(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

impl From<AutodiffError> for TrainError {
    fn from(e: AutodiffError) -> Self {
        TrainError::Model(e.into())
    }
}

#[cfg(test)]
mod tests;
