//! Orientation and dimension estimation heads, trained from scratch.

mod head;
mod optim;
mod train;
mod weights;

use thiserror::Error;

use crate::losses::LossError;
use crate::multibin::MultiBinError;

pub use head::{
    backward, forward, infer, init_params, Branch, ForwardCache, Gradients, HeadConfig,
    HeadOutputs, HeadParams, Linear,
};
pub use optim::{adamw_step, scheduler_step, AdamWConfig, OptimizerState, SchedulerState};
pub use train::{
    batch_loss_and_grads, predict, predict_raw, train, Dataset, EpochStats, Prediction,
    RawPrediction, TrainConfig, TrainReport,
};
pub use weights::{WeightFile, WEIGHT_MAGIC};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Decode(#[from] MultiBinError),
    #[error("non-finite loss or gradient at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("weight file: {0}")]
    WeightFile(String),
}
