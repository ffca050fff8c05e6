use serde::{Deserialize, Serialize};

use super::{CellIndex, GridLayout, RawPrediction, KEYPOINTS, VALUES_PER_PREDICTION};
use crate::geometry::Pixel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssignmentParams {
    /// An anchor matches when `max(extent/anchor, anchor/extent)` on both
    /// axes is below this value.
    pub ratio_threshold: f64,
}

impl Default for AssignmentParams {
    fn default() -> Self {
        Self {
            ratio_threshold: 4.0,
        }
    }
}

/// One (cell, anchor) slot made responsible for the object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assignment {
    pub index: CellIndex,
    /// Target keypoints in grid units of `index.scale`, centre first.
    pub keypoints_grid: [Pixel; KEYPOINTS],
    /// Confidence target for a prediction that lands exactly on the
    /// keypoints. The loss recomputes it against the actual prediction.
    pub confidence: f64,
}

impl Assignment {
    /// Raw head values that decode exactly to this target.
    pub fn raw_values(&self, objectness_logit: f64) -> RawPrediction {
        let (ci, cj) = (f64::from(self.index.i), f64::from(self.index.j));
        let inv_center = |g: f64, c: f64| {
            // invert 2σ(t) − 0.5 + c
            let s = (g - c + 0.5) / 2.0;
            (s / (1.0 - s)).ln()
        };
        let mut raw = [0.0; VALUES_PER_PREDICTION];
        raw[0] = inv_center(self.keypoints_grid[0].x, ci);
        raw[1] = inv_center(self.keypoints_grid[0].y, cj);
        for (k, p) in self.keypoints_grid[1..].iter().enumerate() {
            raw[2 + 2 * k] = p.x - ci;
            raw[3 + 2 * k] = p.y - cj;
        }
        raw[VALUES_PER_PREDICTION - 1] = objectness_logit;
        raw
    }
}

/// Ground-truth encoding of one object; empty when the centre lies outside
/// the image or no anchor matches.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TargetEncoding {
    pub assignments: Vec<Assignment>,
}

impl TargetEncoding {
    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }
}

/// Assigns the nine ground-truth keypoints (pixels, centre first) to slots.
///
/// The target's width and height are the extents of its keypoints. On every
/// scale, each anchor whose shape is within `ratio_threshold` of that extent
/// is used, in the cell containing the centre plus the horizontally and
/// vertically adjacent cells nearest to the centre's position inside it: a
/// centre in the left half of its cell also recruits the left neighbour, one
/// in the top half the cell above, and so on. A centre exactly on the cell
/// midline recruits no neighbour along that axis.
pub fn encode_targets(
    gt_points_px: &[Pixel; KEYPOINTS],
    layout: &GridLayout,
    params: &AssignmentParams,
) -> TargetEncoding {
    let center = gt_points_px[0];
    let padded = [
        f64::from(layout.padded_size[0]),
        f64::from(layout.padded_size[1]),
    ];
    let [pcx, pcy] = [center.x + layout.pad_origin[0], center.y + layout.pad_origin[1]];
    if !(pcx >= 0.0 && pcy >= 0.0 && pcx < padded[0] && pcy < padded[1]) {
        return TargetEncoding::default();
    }

    let (min, max) = gt_points_px.iter().fold(
        ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]),
        |(lo, hi), p| ([lo[0].min(p.x), lo[1].min(p.y)], [hi[0].max(p.x), hi[1].max(p.y)]),
    );
    let extent = [max[0] - min[0], max[1] - min[1]];

    let mut assignments = Vec::new();
    for (scale, s) in layout.scales.iter().enumerate() {
        let to_grid = |p: &Pixel| {
            let [x, y] = layout.pixel_to_grid(scale, [p.x, p.y]);
            Pixel::new(x, y)
        };
        let keypoints_grid = gt_points_px.map(|p| to_grid(&p));
        let g = keypoints_grid[0];
        let (i, j) = (g.x.floor() as i64, g.y.floor() as i64);
        let (fx, fy) = (g.x - i as f64, g.y - j as f64);

        let mut cells = vec![(i, j)];
        if fx < 0.5 && i > 0 {
            cells.push((i - 1, j));
        } else if fx > 0.5 && i + 1 < i64::from(s.width) {
            cells.push((i + 1, j));
        }
        if fy < 0.5 && j > 0 {
            cells.push((i, j - 1));
        } else if fy > 0.5 && j + 1 < i64::from(s.height) {
            cells.push((i, j + 1));
        }

        for (anchor, a) in s.anchors.iter().enumerate() {
            let ratio = |e: f64, a: f64| (e / a).max(a / e);
            let worst = ratio(extent[0], a[0]).max(ratio(extent[1], a[1]));
            if !(worst < params.ratio_threshold) {
                continue;
            }
            for &(ci, cj) in &cells {
                assignments.push(Assignment {
                    index: CellIndex {
                        scale,
                        i: ci as u32,
                        j: cj as u32,
                        anchor,
                    },
                    keypoints_grid,
                    confidence: 1.0,
                });
            }
        }
    }
    assignments.sort_by_key(|a| a.index);
    TargetEncoding { assignments }
}
