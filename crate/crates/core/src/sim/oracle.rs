use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{check_noise, stream_rng, DatasetSample, Purpose, SimError};
use crate::codec::{
    encode_targets, AssignmentParams, CellPrediction, GridLayout, PredictionRecord,
    VALUES_PER_PREDICTION,
};
use crate::geometry::Pixel;

/// Stand-in for the trained network.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    /// Standard deviation of the keypoint jitter, px.
    pub jitter_px: f64,
    /// Objectness logit of the slots that carry the (jittered) keypoints.
    pub planted_logit: f64,
    /// Background slots get logits uniformly within ±1 of this.
    pub background_logit: f64,
    pub background_slots: usize,
    /// When false only background slots are emitted.
    pub plant_signal: bool,
    pub assignment: AssignmentParams,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            jitter_px: 0.0,
            planted_logit: 8.0,
            background_logit: -6.0,
            background_slots: 32,
            plant_signal: true,
            assignment: AssignmentParams::default(),
            seed: 0,
        }
    }
}

/// Prediction records for one sample, ordered by slot.
///
/// The jitter draws do not depend on `jitter_px` (they are scaled unit
/// normals), so runs that differ only in the noise level see the same
/// perturbation directions.
pub fn oracle_predict(
    sample: &DatasetSample,
    layout: &GridLayout,
    config: &OracleConfig,
) -> Result<Vec<PredictionRecord>, SimError> {
    check_noise(config.jitter_px)?;
    let mut rng = stream_rng(config.seed, Purpose::Oracle, sample.id);
    let jittered = sample.points_2d.map(|p| {
        let (du, dv): (f64, f64) = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
        Pixel::new(p.x + config.jitter_px * du, p.y + config.jitter_px * dv)
    });

    let mut slots: Vec<(usize, CellPrediction)> = Vec::new();
    if config.plant_signal {
        for a in encode_targets(&jittered, layout, &config.assignment).assignments {
            let flat = layout.flat_index(&a.index).expect("assigned slot in layout");
            slots.push((flat, CellPrediction { index: a.index, raw: a.raw_values(config.planted_logit) }));
        }
    }

    let total = layout.total_predictions();
    let mut taken: BTreeSet<usize> = slots.iter().map(|(k, _)| *k).collect();
    let wanted = config.background_slots.min(total - taken.len());
    let mut background = 0;
    while background < wanted {
        let flat = rng.random_range(0..total);
        if !taken.insert(flat) {
            continue;
        }
        let mut raw = [0.0; VALUES_PER_PREDICTION];
        for v in &mut raw[..VALUES_PER_PREDICTION - 1] {
            *v = rng.random_range(-3.0..3.0);
        }
        raw[VALUES_PER_PREDICTION - 1] = config.background_logit + rng.random_range(-1.0..1.0);
        let index = layout.cell_index(flat).expect("flat index in range");
        slots.push((flat, CellPrediction { index, raw }));
        background += 1;
    }
    slots.sort_by_key(|(k, _)| *k);
    Ok(slots
        .into_iter()
        .map(|(_, prediction)| PredictionRecord { sample_id: sample.id, prediction })
        .collect())
}
