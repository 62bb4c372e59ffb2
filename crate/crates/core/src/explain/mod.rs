//! Model explanations: feature importance, partial dependence and ICE curves,
//! local linear surrogates, Shapley attributions, and PDP threshold scans.
//!
//! Everything here reads the model through [`Predictor`](crate::Predictor)
//! except gain importance, which needs the trees. Work is split across rows
//! or coalitions with rayon and reduced in a fixed order, so results do not
//! depend on the thread count.

mod importance;
mod lime;
mod pdp;
mod shap;
mod threshold;

use thiserror::Error;

use crate::data::DataError;
use crate::gbt::GbtError;

pub use importance::{
    importance_gain, importance_permutation, ImportanceEntry, ImportanceMode, ImportanceReport,
};
pub use lime::{lime_explain, LimeConfig, LimeExplanation, LimeWeight};
pub use pdp::{ice, pdp, quantile_grid, IceBundle, PdpCurve, DEFAULT_GRID_POINTS};
pub use shap::{
    sample_background, shap_exact, shap_sampled, ShapAttribution, ShapMethod,
    DEFAULT_BACKGROUND_ROWS, MAX_EXACT_FEATURES,
};
pub use threshold::{threshold_scan, Direction, ThresholdFinding};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExplainError {
    #[error("feature `{0}` has fewer than two distinct present values")]
    ConstantFeature(String),
    #[error("feature index {index} out of range for {d} features")]
    FeatureOutOfRange { index: usize, d: usize },
    #[error("dimension mismatch: model has {expected} features, input has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{d} features exceed the exact Shapley limit of {max}; use the sampled estimator")]
    TooManyFeatures { d: usize, max: usize },
    #[error("background set is empty")]
    EmptyBackground,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Gbt(#[from] GbtError),
}

pub type Result<T> = std::result::Result<T, ExplainError>;

fn check_feature(feature: usize, d: usize) -> Result<()> {
    if feature >= d {
        Err(ExplainError::FeatureOutOfRange { index: feature, d })
    } else {
        Ok(())
    }
}

fn check_width(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        Err(ExplainError::DimensionMismatch { expected, got })
    } else {
        Ok(())
    }
}
