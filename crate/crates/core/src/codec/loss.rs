use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    decode_prediction, keypoint_confidence, CodecError, ConfidenceParams, GridPredictions,
    TargetEncoding, KEYPOINTS, VALUES_PER_PREDICTION,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub points: f64,
    pub conf: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            points: 1.0,
            conf: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub points: f64,
    pub conf: f64,
    pub total: f64,
    pub weights: LossWeights,
}

/// `L = λ_points·L_points + λ_conf·L_conf`.
///
/// `L_points` is the mean absolute error over the 18 keypoint coordinates of
/// every assigned slot, in grid units. `L_conf` is the binary cross-entropy
/// between each slot's objectness and its confidence target, averaged over
/// all slots; unassigned slots have target 0 and assigned slots the
/// keypoint confidence of their current prediction.
///
/// Sums run in flat slot order with compensated summation, so the result
/// does not depend on the order of `target.assignments`.
pub fn compute_loss(
    pred: &GridPredictions,
    target: &TargetEncoding,
    weights: &LossWeights,
    conf_params: &ConfidenceParams,
) -> Result<LossBreakdown, CodecError> {
    let layout = &pred.layout;
    if pred.values.len() != layout.total_predictions() {
        return Err(CodecError::ShapeMismatch(format!(
            "{} predictions for a layout of {}",
            pred.values.len(),
            layout.total_predictions()
        )));
    }

    let mut assigned = BTreeMap::new();
    for a in &target.assignments {
        let k = layout.flat_index(&a.index).ok_or_else(|| {
            CodecError::ShapeMismatch(format!("assignment {:?} outside the layout", a.index))
        })?;
        if assigned.insert(k, a).is_some() {
            return Err(CodecError::ShapeMismatch(format!(
                "slot {:?} assigned twice",
                a.index
            )));
        }
    }

    let mut points = Compensated::default();
    let mut conf_targets = BTreeMap::new();
    for (&k, a) in &assigned {
        let d = decode_prediction(a.index, &pred.values[k]);
        for (p, t) in d.keypoints_grid.iter().zip(&a.keypoints_grid) {
            points.add((p.x - t.x).abs());
            points.add((p.y - t.y).abs());
        }
        let s = &layout.scales[a.index.scale];
        conf_targets.insert(
            k,
            keypoint_confidence(&d.keypoints_grid, &a.keypoints_grid, [s.width, s.height], conf_params)
                .min(1.0),
        );
    }
    let l_points = if assigned.is_empty() {
        0.0
    } else {
        points.sum() / (2 * KEYPOINTS * assigned.len()) as f64
    };

    let mut conf = Compensated::default();
    for (k, raw) in pred.values.iter().enumerate() {
        let t = conf_targets.get(&k).copied().unwrap_or(0.0);
        conf.add(bce_with_logit(raw[VALUES_PER_PREDICTION - 1], t));
    }
    let l_conf = conf.sum() / pred.values.len() as f64;

    Ok(LossBreakdown {
        points: l_points,
        conf: l_conf,
        total: weights.points * l_points + weights.conf * l_conf,
        weights: *weights,
    })
}

/// Stable `−[t·ln σ(x) + (1−t)·ln(1−σ(x))]`.
fn bce_with_logit(x: f64, t: f64) -> f64 {
    x.max(0.0) - x * t + (-x.abs()).exp().ln_1p()
}

/// Neumaier summation.
#[derive(Default)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn sum(&self) -> f64 {
        self.sum + self.carry
    }
}
