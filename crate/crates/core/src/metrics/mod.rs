//! Pose accuracy metrics.
//!
//! * ADD: mean distance between model vertices under the ground-truth and
//!   the predicted pose.
//! * ADD-S: as ADD, but each ground-truth vertex is matched to the closest
//!   predicted vertex, which makes it insensitive to symmetric ambiguities.
//! * 2D reprojection, translation and angular errors.
//!
//! A pose counts as correct at a threshold when the symmetry-appropriate
//! ADD(-S) value is strictly below it; thresholds are fractions of the
//! object diameter `d` or absolute millimetre values.

mod distance;
mod model;
mod report;

pub use distance::{add, add_s};
pub use model::{InstrumentModel, InstrumentSpec, Symmetry};
pub use report::{
    aggregate, angular_error, default_thresholds, evaluate_pose, reprojection_error_2d,
    translation_error, AccuracyReport, MeanStd, PoseEvaluation, Threshold, ThresholdFlag,
    ThresholdRate,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("model has no vertices")]
    EmptyModel,
    #[error("invalid instrument model: {0}")]
    InvalidModel(String),
    #[error("point lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("nothing to aggregate")]
    EmptyEvaluations,
    #[error("evaluation {0} has no flag for threshold {1}")]
    MissingThreshold(usize, String),
    #[error("invalid threshold `{0}`")]
    InvalidThreshold(String),
}
