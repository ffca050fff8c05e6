//! Mathematics of the multi-scale keypoint head, without the network.
//!
//! Each of three output scales (strides 8, 16 and 32 px) is a `W × H` grid
//! with `n_a` anchors per cell. Every (cell, anchor) slot predicts 19 values:
//!
//! | index | meaning                                             |
//! |-------|-----------------------------------------------------|
//! | 0..2  | object centre logits `(t_x0, t_y0)`                 |
//! | 2..18 | eight projected box corners `(t_x, t_y)` offsets    |
//! | 18    | objectness logit                                    |
//!
//! The centre is decoded with the scaled sigmoid `2σ(t) − 0.5 + c_offset`,
//! corners with a plain additive offset, and objectness with `σ`. All
//! keypoint coordinates are in grid units of their scale until converted back
//! to pixels.

mod confidence;
mod decode;
mod layout;
mod loss;
mod records;
mod targets;

pub use confidence::{confidence, keypoint_confidence, ConfidenceParams};
pub use decode::{
    decode_center, decode_corners, decode_prediction, select_best, sigmoid, CellPrediction,
    DecodedPrediction, Detection, GridPredictions,
};
pub use layout::{AnchorSet, CellIndex, GridLayout, ScaleLayout, STRIDES};
pub use loss::{compute_loss, LossBreakdown, LossWeights};
pub use records::{parse_predictions, read_predictions, write_predictions, PredictionRecord};
pub use targets::{encode_targets, Assignment, AssignmentParams, TargetEncoding};

use thiserror::Error;

/// Values predicted by one (cell, anchor) slot in the single-class case.
pub const VALUES_PER_PREDICTION: usize = 19;
/// Object centre plus eight box corners.
pub const KEYPOINTS: usize = 9;

pub type RawPrediction = [f64; VALUES_PER_PREDICTION];

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error("no predictions to select from")]
    EmptyPredictions,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
