use super::{CellIndex, CodecError, GridLayout, RawPrediction, KEYPOINTS, VALUES_PER_PREDICTION};
use crate::geometry::Pixel;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Scaled-sigmoid centre decoding: `2σ(t) − 0.5 + c` per axis, where `c` is
/// the cell's top-left corner. The result stays inside `(c − 0.5, c + 1.5)`.
pub fn decode_center(logits: [f64; 2], cell: [u32; 2]) -> [f64; 2] {
    [
        2.0 * sigmoid(logits[0]) - 0.5 + f64::from(cell[0]),
        2.0 * sigmoid(logits[1]) - 0.5 + f64::from(cell[1]),
    ]
}

/// Corner decoding is an unbounded offset from the cell corner, since
/// projected box corners can fall many cells away.
pub fn decode_corners(raw: &[[f64; 2]; 8], cell: [u32; 2]) -> [[f64; 2]; 8] {
    raw.map(|[x, y]| [x + f64::from(cell[0]), y + f64::from(cell[1])])
}

/// One slot of the head output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellPrediction {
    pub index: CellIndex,
    pub raw: RawPrediction,
}

impl CellPrediction {
    pub fn objectness_logit(&self) -> f64 {
        self.raw[VALUES_PER_PREDICTION - 1]
    }
}

/// Keypoints in grid units of the slot's scale, centre first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodedPrediction {
    pub index: CellIndex,
    pub keypoints_grid: [Pixel; KEYPOINTS],
    pub confidence: f64,
}

pub fn decode_prediction(index: CellIndex, raw: &RawPrediction) -> DecodedPrediction {
    let cell = [index.i, index.j];
    let center = decode_center([raw[0], raw[1]], cell);
    let corners_raw: [[f64; 2]; 8] = std::array::from_fn(|k| [raw[2 + 2 * k], raw[3 + 2 * k]]);
    let corners = decode_corners(&corners_raw, cell);
    let mut keypoints_grid = [Pixel::new(center[0], center[1]); KEYPOINTS];
    for (kp, c) in keypoints_grid[1..].iter_mut().zip(corners) {
        *kp = Pixel::new(c[0], c[1]);
    }
    DecodedPrediction {
        index,
        keypoints_grid,
        confidence: sigmoid(raw[VALUES_PER_PREDICTION - 1]),
    }
}

/// The chosen candidate, with keypoints in pixels of the original image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub index: CellIndex,
    pub confidence: f64,
    pub keypoints_px: [Pixel; KEYPOINTS],
}

impl Detection {
    fn from_decoded(d: &DecodedPrediction, layout: &GridLayout) -> Self {
        Self {
            index: d.index,
            confidence: d.confidence,
            keypoints_px: d.keypoints_grid.map(|g| {
                let [u, v] = layout.grid_to_pixel(d.index.scale, [g.x, g.y]);
                Pixel::new(u, v)
            }),
        }
    }
}

/// Picks the slot with the highest objectness; ties go to the lowest
/// (scale, i, j, anchor) index.
///
/// Comparing logits is equivalent to comparing `σ(logit)` and avoids the
/// saturation of the sigmoid at large logits.
pub fn select_best(predictions: &[CellPrediction], layout: &GridLayout) -> Result<Detection, CodecError> {
    let mut best: Option<&CellPrediction> = None;
    for p in predictions {
        if layout.flat_index(&p.index).is_none() {
            return Err(CodecError::ShapeMismatch(format!(
                "slot {:?} outside the layout",
                p.index
            )));
        }
        if p.objectness_logit().is_nan() {
            continue;
        }
        best = match best {
            Some(b)
                if b.objectness_logit() > p.objectness_logit()
                    || (b.objectness_logit() == p.objectness_logit() && b.index <= p.index) =>
            {
                Some(b)
            }
            _ => Some(p),
        };
    }
    let best = best.ok_or(CodecError::EmptyPredictions)?;
    Ok(Detection::from_decoded(&decode_prediction(best.index, &best.raw), layout))
}

/// Dense head output for every slot of a layout, in flat storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPredictions {
    pub layout: GridLayout,
    pub values: Vec<RawPrediction>,
}

impl GridPredictions {
    pub fn new(layout: GridLayout, values: Vec<RawPrediction>) -> Result<Self, CodecError> {
        if values.len() != layout.total_predictions() {
            return Err(CodecError::ShapeMismatch(format!(
                "{} predictions for a layout of {}",
                values.len(),
                layout.total_predictions()
            )));
        }
        Ok(Self { layout, values })
    }

    /// Every slot filled with the same raw vector.
    pub fn filled(layout: GridLayout, raw: RawPrediction) -> Self {
        let n = layout.total_predictions();
        Self {
            layout,
            values: vec![raw; n],
        }
    }

    pub fn get(&self, index: &CellIndex) -> Option<&RawPrediction> {
        self.layout.flat_index(index).map(|k| &self.values[k])
    }

    pub fn set(&mut self, index: &CellIndex, raw: RawPrediction) -> Result<(), CodecError> {
        let k = self
            .layout
            .flat_index(index)
            .ok_or_else(|| CodecError::ShapeMismatch(format!("slot {index:?} outside the layout")))?;
        self.values[k] = raw;
        Ok(())
    }

    /// Same rule as [`select_best`] over the dense grid.
    pub fn select_best(&self) -> Result<Detection, CodecError> {
        let mut best: Option<(usize, f64)> = None;
        for (k, raw) in self.values.iter().enumerate() {
            let logit = raw[VALUES_PER_PREDICTION - 1];
            if logit.is_nan() {
                continue;
            }
            // strict comparison keeps the lowest index on ties
            if best.is_none_or(|(_, b)| logit > b) {
                best = Some((k, logit));
            }
        }
        let (k, _) = best.ok_or(CodecError::EmptyPredictions)?;
        let index = self.layout.cell_index(k).expect("flat index in range");
        Ok(Detection::from_decoded(
            &decode_prediction(index, &self.values[k]),
            &self.layout,
        ))
    }

    pub fn to_cells(&self) -> Vec<CellPrediction> {
        self.values
            .iter()
            .enumerate()
            .map(|(k, raw)| CellPrediction {
                index: self.layout.cell_index(k).expect("flat index in range"),
                raw: *raw,
            })
            .collect()
    }
}
