use nalgebra::Vector3;

use super::{InstrumentModel, MetricsError};
use crate::geometry::{RigidTransform, WorldPoint};

/// Mean vertex displacement between the two poses, mm.
pub fn add(
    model: &InstrumentModel,
    gt: &RigidTransform,
    pred: &RigidTransform,
) -> Result<f64, MetricsError> {
    if model.vertices.is_empty() {
        return Err(MetricsError::EmptyModel);
    }
    let sum: f64 = model
        .vertices
        .iter()
        .map(|v| (gt.apply(v) - pred.apply(v)).norm())
        .sum();
    Ok(sum / model.vertices.len() as f64)
}

/// Mean closest-vertex distance from the ground-truth placement to the
/// predicted placement, mm.
pub fn add_s(
    model: &InstrumentModel,
    gt: &RigidTransform,
    pred: &RigidTransform,
) -> Result<f64, MetricsError> {
    if model.vertices.is_empty() {
        return Err(MetricsError::EmptyModel);
    }
    let predicted: Vec<WorldPoint> = model.vertices.iter().map(|v| pred.apply(v)).collect();
    let grid = PointGrid::new(&predicted);
    let sum: f64 = model
        .vertices
        .iter()
        .map(|v| grid.nearest_distance(&gt.apply(v)))
        .sum();
    Ok(sum / model.vertices.len() as f64)
}

/// Uniform bucket grid over a fixed point set for exact nearest-neighbour
/// queries.
pub(crate) struct PointGrid<'a> {
    points: &'a [WorldPoint],
    origin: Vector3<f64>,
    cell: f64,
    dims: [i64; 3],
    buckets: Vec<Vec<u32>>,
}

impl<'a> PointGrid<'a> {
    pub(crate) fn new(points: &'a [WorldPoint]) -> Self {
        let (lo, hi) = points.iter().fold(
            (Vector3::repeat(f64::INFINITY), Vector3::repeat(f64::NEG_INFINITY)),
            |(lo, hi), p| (lo.inf(&p.coords), hi.sup(&p.coords)),
        );
        let extent = hi - lo;
        // about two points per occupied cell for surface-like sets
        let area = 2.0 * (extent.x * extent.y + extent.y * extent.z + extent.x * extent.z);
        let mut cell = (2.0 * area / points.len() as f64).sqrt();
        let longest = extent.max();
        if !(cell > 0.0 && cell.is_finite()) {
            cell = if longest > 0.0 { longest } else { 1.0 };
        }
        cell = cell.max(longest / 64.0);
        let dims = [0, 1, 2].map(|a| ((extent[a] / cell).floor() as i64 + 1).max(1));
        let mut buckets = vec![Vec::new(); (dims[0] * dims[1] * dims[2]) as usize];
        let mut grid = Self { points, origin: lo, cell, dims, buckets: Vec::new() };
        for (k, p) in points.iter().enumerate() {
            let c = grid.clamp(grid.cell_of(p));
            buckets[grid.flat(c)].push(k as u32);
        }
        grid.buckets = buckets;
        grid
    }

    fn cell_of(&self, p: &WorldPoint) -> [i64; 3] {
        [0, 1, 2].map(|a| ((p[a] - self.origin[a]) / self.cell).floor() as i64)
    }

    fn clamp(&self, c: [i64; 3]) -> [i64; 3] {
        [0, 1, 2].map(|a| c[a].clamp(0, self.dims[a] - 1))
    }

    fn flat(&self, c: [i64; 3]) -> usize {
        ((c[0] * self.dims[1] + c[1]) * self.dims[2] + c[2]) as usize
    }

    pub(crate) fn nearest_distance(&self, q: &WorldPoint) -> f64 {
        let qc = self.cell_of(q);
        // Chebyshev ring index beyond which no grid cell exists
        let last_ring = (0..3)
            .map(|a| (qc[a]).abs().max((self.dims[a] - 1 - qc[a]).abs()))
            .max()
            .unwrap_or(0);
        let mut best = f64::INFINITY;
        for r in 0..=last_ring {
            for dx in -r..=r {
                let x = qc[0] + dx;
                if x < 0 || x >= self.dims[0] {
                    continue;
                }
                for dy in -r..=r {
                    let y = qc[1] + dy;
                    if y < 0 || y >= self.dims[1] {
                        continue;
                    }
                    let on_shell = dx.abs() == r || dy.abs() == r;
                    let mut visit = |dz: i64| {
                        let z = qc[2] + dz;
                        if z < 0 || z >= self.dims[2] {
                            return;
                        }
                        for &k in &self.buckets[self.flat([x, y, z])] {
                            let d = (q - self.points[k as usize]).norm();
                            if d < best {
                                best = d;
                            }
                        }
                    };
                    if on_shell {
                        (-r..=r).for_each(&mut visit);
                    } else {
                        visit(-r);
                        if r > 0 {
                            visit(r);
                        }
                    }
                }
            }
            // cells outside ring r lie at least r cell widths from q
            // (points clamped into border cells only move further out)
            if best <= r as f64 * self.cell {
                break;
            }
        }
        best
    }
}
