//! Experiment configuration and the runner that turns one configuration into
//! metrics tables, reconstruction grids, loss histories and analysis files.

mod config;
mod runner;

pub use config::{
    preset, AnalysisSection, ConvergenceConfig, BallSection, DataSource, DatasetSection, DictionarySection, ExperimentConfig,
    ExperimentId, Method, NetworkConfig, NoiseConfig, RunSeeds, ScalesSection, StabilitySection, StructuredSection,
    TrainingSection, PRESETS,
};
pub use runner::{
    evaluate_method, prepare_data, run_experiment, train_method, MethodResult, MetricsRow, PreparedData, RunOptions, RunSummary,
    TrainedMethod,
};

use std::path::PathBuf;

use crate::analysis::AnalysisError;
use crate::classical::ClassicalError;
use crate::data::DataError;
use crate::linalg::LinalgError;
use crate::lsvd::LsvdError;
use crate::nn::NnError;
use crate::tomo::TomoError;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("config does not parse: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid config field `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{method}: {source}")]
    Method { method: config::Method, source: Box<ExperimentError> },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Tomo(#[from] TomoError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Classical(#[from] ClassicalError),
    #[error(transparent)]
    Lsvd(#[from] LsvdError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

impl ExperimentError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}
