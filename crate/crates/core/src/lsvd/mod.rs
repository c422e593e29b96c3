//! Learned singular value decomposition: encoders and decoders on both the
//! data and image side, a latent scaling Σ between them, and the training
//! loop that fits all of it.

mod checkpoint;
mod latent;
mod loss;
mod model;
mod sigma;
mod train;

pub use checkpoint::{load_model, save_model, ModelManifest};
pub use latent::sample_structured_latent;
pub use loss::{lsvd_loss, LossBreakdown, LossWeights};
pub use model::{Branch, BranchArchitecture, LsvdArchitecture, LsvdModel, TrainingBatchOutputs};
pub use sigma::{SigmaCache, SigmaGradients, SigmaKind, SigmaVariant};
pub use train::{evaluate_mse, loss_breakdown, train_lsvd, EpochRecord, Output, TrainingConfig, TrainingHistory};

use crate::nn::NnError;

#[derive(Debug, thiserror::Error)]
pub enum LsvdError {
    #[error("{what}: expected dimension {expected}, got {got}")]
    Shape { what: &'static str, expected: usize, got: usize },
    #[error("invalid model: {0}")]
    Model(String),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch} (terms {terms:?})")]
    NonFiniteLoss { epoch: usize, batch: usize, terms: LossBreakdown },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
