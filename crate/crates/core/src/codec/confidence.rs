use serde::{Deserialize, Serialize};

use super::KEYPOINTS;
use crate::geometry::Pixel;

/// Parameters of the distance-based confidence target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceParams {
    /// Sharpness of the exponential.
    pub alpha: f64,
    /// Cut-off as a fraction of the grid diagonal.
    pub beta: f64,
    /// Divide by `e^α` so that `c(0) = 1`. Without it the peak is `e^α`.
    pub normalized: bool,
}

impl Default for ConfidenceParams {
    fn default() -> Self {
        Self {
            alpha: 2.0,
            beta: 0.2,
            normalized: true,
        }
    }
}

impl ConfidenceParams {
    /// Cut-off distance `d_T = β·√(W² + H²)` in grid units.
    pub fn cutoff(&self, grid: [u32; 2]) -> f64 {
        let (w, h) = (f64::from(grid[0]), f64::from(grid[1]));
        self.beta * w.hypot(h)
    }
}

/// Confidence of a point `distance` grid units from its target on a `W × H`
/// grid: `e^{α(1 − D/d_T)}` inside the cut-off, zero beyond it (divided by
/// `e^α` when normalised).
pub fn confidence(distance: f64, grid: [u32; 2], params: &ConfidenceParams) -> f64 {
    let cutoff = params.cutoff(grid);
    if !(distance < cutoff) {
        return 0.0;
    }
    let ratio = distance.max(0.0) / cutoff;
    if params.normalized {
        (-params.alpha * ratio).exp()
    } else {
        (params.alpha * (1.0 - ratio)).exp()
    }
}

/// Cell confidence for a full keypoint set: the mean of the per-point
/// confidences, each using the L1 distance in grid units.
pub fn keypoint_confidence(
    predicted: &[Pixel; KEYPOINTS],
    target: &[Pixel; KEYPOINTS],
    grid: [u32; 2],
    params: &ConfidenceParams,
) -> f64 {
    predicted
        .iter()
        .zip(target)
        .map(|(p, t)| confidence((p.x - t.x).abs() + (p.y - t.y).abs(), grid, params))
        .sum::<f64>()
        / KEYPOINTS as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const GRID: [u32; 2] = [80, 60];

    #[test]
    fn examples() {
        let p = ConfidenceParams::default();
        let cutoff = p.cutoff(GRID);
        assert_eq!(cutoff, 0.2 * 100.0);
        assert_eq!(confidence(0.0, GRID, &p), 1.0);
        assert_eq!(confidence(cutoff, GRID, &p), 0.0);
        assert_eq!(confidence(cutoff * 3.0, GRID, &p), 0.0);
        assert!((confidence(cutoff / 2.0, GRID, &p) - (-1f64).exp()).abs() < 1e-15);
        assert!((confidence(cutoff / 2.0, GRID, &p) - 0.3679).abs() < 1e-4);
    }

    #[test]
    fn raw_form_peaks_at_e_alpha() {
        let p = ConfidenceParams {
            normalized: false,
            ..Default::default()
        };
        assert!((confidence(0.0, GRID, &p) - 2f64.exp()).abs() < 1e-12);
        let n = ConfidenceParams::default();
        let d = 7.3;
        assert!((confidence(d, GRID, &p) / 2f64.exp() - confidence(d, GRID, &n)).abs() < 1e-15);
    }

    #[test]
    fn keypoint_confidence_of_exact_prediction_is_one() {
        let pts = [Pixel::new(3.0, 4.0); KEYPOINTS];
        assert_eq!(keypoint_confidence(&pts, &pts, GRID, &ConfidenceParams::default()), 1.0);
    }

    proptest! {
        #[test]
        fn bounded_and_monotone(a in 0.0..50.0f64, b in 0.0..50.0f64, alpha in 0.1..10.0f64) {
            let p = ConfidenceParams { alpha, ..Default::default() };
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (c_lo, c_hi) = (confidence(lo, GRID, &p), confidence(hi, GRID, &p));
            prop_assert!((0.0..=1.0).contains(&c_lo));
            prop_assert!(c_hi <= c_lo);
        }
    }
}
