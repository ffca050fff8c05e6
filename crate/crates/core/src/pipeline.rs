//! Prediction records to evaluated poses: pick the most confident slot,
//! solve PnP against the instrument's control points, score against the
//! ground truth.

use thiserror::Error;

use crate::codec::{select_best, CellPrediction, CodecError, Detection, GridLayout};
use crate::geometry::{AcquisitionGeometry, RigidTransform};
use crate::metrics::{evaluate_pose, InstrumentModel, MetricsError, PoseEvaluation, Threshold};
use crate::pnp::{solve_pose, CorrespondenceSet, PnPSolution, PnpError};
use crate::sim::DatasetSample;

#[derive(Debug, Error)]
pub enum PipelineError {
    /// Nothing above the confidence floor (or no records at all).
    #[error("no detection")]
    NoDetection,
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Pnp(#[from] PnpError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    /// Minimum objectness probability for a usable detection.
    pub min_confidence: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self { min_confidence: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseEstimate {
    pub detection: Detection,
    pub solution: PnPSolution,
}

impl PoseEstimate {
    pub fn pose(&self) -> &RigidTransform {
        &self.solution.pose
    }
}

pub fn estimate_pose(
    predictions: &[CellPrediction],
    layout: &GridLayout,
    model: &InstrumentModel,
    geometry: &AcquisitionGeometry,
    config: &PipelineConfig,
) -> Result<PoseEstimate, PipelineError> {
    let detection = match select_best(predictions, layout) {
        Ok(d) => d,
        Err(CodecError::EmptyPredictions) => return Err(PipelineError::NoDetection),
        Err(e) => return Err(e.into()),
    };
    if !(detection.confidence >= config.min_confidence) {
        return Err(PipelineError::NoDetection);
    }
    let c = CorrespondenceSet::new(
        model.control_points.to_vec(),
        detection.keypoints_px.to_vec(),
        geometry,
    )?;
    Ok(PoseEstimate { detection, solution: solve_pose(&c)? })
}

/// Scores an estimate against a dataset sample.
pub fn evaluate_estimate(
    sample: &DatasetSample,
    estimate: &PoseEstimate,
    model: &InstrumentModel,
    thresholds: &[Threshold],
) -> Result<PoseEvaluation, PipelineError> {
    Ok(evaluate_pose(
        sample.id,
        model,
        &sample.pose,
        estimate.pose(),
        &sample.points_2d,
        &estimate.detection.keypoints_px,
        thresholds,
    )?)
}
