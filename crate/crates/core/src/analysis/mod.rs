//! Empirical checks of the regularisation theory and the diagnostics used to
//! inspect trained models.

mod appendix_b;
mod convergence;
mod dictionary;
mod scales;
mod stability;

pub use appendix_b::{appendix_b_inequality_check, AppendixBGrid, AppendixBReport};
pub use convergence::{
    convergence_rate_experiment, fit_log_slope, tikhonov_level_error, ConvergenceReport, ConvergenceRow,
    ConvergenceRunSpec, ConvergenceScaling, ErrorMeasure, SourceCondition,
};
pub use dictionary::{decode_dictionary, write_dictionary, Dictionary};
pub use scales::{gaussian_smooth, scale_noise_curves, write_scale_csv, ScaleCurves};
pub use stability::{ball_coverage_estimate, stability_bound, BallCoverageReport, StabilityReport};

use crate::linalg::LinalgError;
use crate::lsvd::LsvdError;
use crate::nn::NnError;

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("need at least 3 noise levels to fit a rate, got {0}")]
    TooFewLevels(usize),
    #[error("invalid run specification: {0}")]
    Spec(String),
    #[error("stability bound does not apply: {0}")]
    BoundInvalid(String),
    #[error(transparent)]
    Lsvd(#[from] LsvdError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Tomo(#[from] crate::tomo::TomoError),
    #[error(transparent)]
    Data(#[from] crate::data::DataError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
