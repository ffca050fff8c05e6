//! EPnP: every object point is written as a barycentric combination of a few
//! virtual control points. The camera-frame control points then lie in the
//! null space of a `2n × 3m` linear system; a combination of the `N` smallest
//! right singular vectors is fixed by requiring the control points to keep
//! their object-frame distances.

use nalgebra::{DMatrix, DVector, SymmetricEigen, Vector3};

use super::{register_point_sets, CorrespondenceSet, PnPSolution, PnpError};
use crate::geometry::{RigidTransform, WorldPoint};

const COLLINEAR_TOL: f64 = 1e-12;
const PLANAR_TOL: f64 = 1e-10;
const BETA_GN_ITERS: usize = 10;

/// Control points: the centroid plus principal axes scaled by the standard
/// deviation along them. Planar sets get two axes.
struct ControlFrame {
    centroid: Vector3<f64>,
    axes: Vec<Vector3<f64>>,
}

impl ControlFrame {
    fn fit(points: &[WorldPoint]) -> Result<Self, PnpError> {
        let n = points.len() as f64;
        let centroid = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / n;
        let cov = points.iter().fold(nalgebra::Matrix3::zeros(), |acc, p| {
            let d = p.coords - centroid;
            acc + d * d.transpose()
        }) / n;
        let eig = SymmetricEigen::new(cov);
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let lambda = order.map(|i| eig.eigenvalues[i].max(0.0));
        if !(lambda[0] > 0.0) {
            return Err(PnpError::Degenerate("object points coincide"));
        }
        if lambda[1] <= COLLINEAR_TOL * lambda[0] {
            return Err(PnpError::Degenerate("object points are collinear"));
        }
        let dims = if lambda[2] <= PLANAR_TOL * lambda[0] { 2 } else { 3 };
        let axes = (0..dims)
            .map(|k| eig.eigenvectors.column(order[k]).into_owned() * lambda[k].sqrt())
            .collect();
        Ok(Self { centroid, axes })
    }

    fn count(&self) -> usize {
        self.axes.len() + 1
    }

    fn world_controls(&self) -> Vec<Vector3<f64>> {
        std::iter::once(self.centroid)
            .chain(self.axes.iter().map(|a| self.centroid + a))
            .collect()
    }

    fn barycentric(&self, p: &WorldPoint) -> Vec<f64> {
        let d = p.coords - self.centroid;
        let rest: Vec<f64> = self
            .axes
            .iter()
            .map(|a| a.dot(&d) / a.norm_squared())
            .collect();
        std::iter::once(1.0 - rest.iter().sum::<f64>())
            .chain(rest)
            .collect()
    }
}

/// Closed-form EPnP pose.
///
/// Candidates are built from the 1, 2 and 3 smallest singular directions
/// (1 and 2 for planar targets, which only have three control-point
/// distances); each is polished on the distance constraints and the one with
/// the lowest reprojection error wins.
pub fn solve_epnp(c: &CorrespondenceSet) -> Result<PnPSolution, PnpError> {
    let n = c.len();
    if n < 4 {
        return Err(PnpError::InsufficientCorrespondences { got: n, need: 4 });
    }
    let frame = ControlFrame::fit(&c.object_points)?;
    let m = frame.count();
    let alphas: Vec<Vec<f64>> = c.object_points.iter().map(|p| frame.barycentric(p)).collect();

    let cols = 3 * m;
    let rows = (2 * n).max(cols);
    let mut mat = DMatrix::<f64>::zeros(rows, cols);
    for (i, (alpha, px)) in alphas.iter().zip(&c.image_points).enumerate() {
        let (x, y) = c.camera.normalize(px);
        for (j, &a) in alpha.iter().enumerate() {
            mat[(2 * i, 3 * j)] = a;
            mat[(2 * i, 3 * j + 2)] = -a * x;
            mat[(2 * i + 1, 3 * j + 1)] = a;
            mat[(2 * i + 1, 3 * j + 2)] = -a * y;
        }
    }
    let svd = mat.svd(false, true);
    let v_t = svd.v_t.ok_or(PnpError::Degenerate("singular value decomposition failed"))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let null_vectors: Vec<DVector<f64>> = order
        .iter()
        .take(3)
        .map(|&k| v_t.row(k).transpose().into_owned())
        .collect();

    let world_controls = frame.world_controls();
    let pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|k| (k + 1..m).map(move |l| (k, l)))
        .collect();
    let target_sq: Vec<f64> = pairs
        .iter()
        .map(|&(k, l)| (world_controls[k] - world_controls[l]).norm_squared())
        .collect();

    let max_dims = if m == 4 { 3 } else { 2 };
    let mut best: Option<PnPSolution> = None;
    for dims in 1..=max_dims {
        // differences of each null vector's control points, per pair
        let deltas: Vec<Vec<Vector3<f64>>> = pairs
            .iter()
            .map(|&(k, l)| {
                null_vectors[..dims]
                    .iter()
                    .map(|v| control(v, k) - control(v, l))
                    .collect()
            })
            .collect();
        let Some(mut betas) = initial_betas(dims, &deltas, &target_sq) else {
            continue;
        };
        refine_betas(&mut betas, &deltas, &target_sq);

        let Some(pose) = pose_from_betas(&betas, &null_vectors[..dims], &alphas, c) else {
            continue;
        };
        let Some(err) = c.mean_reprojection_error(&pose) else {
            continue;
        };
        if best.is_none_or(|b| err < b.mean_reprojection_error_px) {
            best = Some(PnPSolution {
                pose,
                mean_reprojection_error_px: err,
                refinement_iterations: 0,
            });
        }
    }
    best.ok_or(PnpError::NoValidPose)
}

fn control(v: &DVector<f64>, k: usize) -> Vector3<f64> {
    Vector3::new(v[3 * k], v[3 * k + 1], v[3 * k + 2])
}

/// Linearised estimate: solve for the products `β_a·β_b` in least squares
/// and read the betas off the first row.
fn initial_betas(dims: usize, deltas: &[Vec<Vector3<f64>>], target_sq: &[f64]) -> Option<Vec<f64>> {
    if dims == 1 {
        let (num, den) = deltas
            .iter()
            .zip(target_sq)
            .fold((0.0, 0.0), |(num, den), (d, &t)| {
                let len = d[0].norm();
                (num + len * t.sqrt(), den + len * len)
            });
        return (den > 0.0).then(|| vec![num / den]);
    }

    let products: Vec<(usize, usize)> = (0..dims)
        .flat_map(|a| (a..dims).map(move |b| (a, b)))
        .collect();
    let mut l = DMatrix::<f64>::zeros(deltas.len(), products.len());
    for (row, d) in deltas.iter().enumerate() {
        for (col, &(a, b)) in products.iter().enumerate() {
            l[(row, col)] = if a == b {
                d[a].norm_squared()
            } else {
                2.0 * d[a].dot(&d[b])
            };
        }
    }
    let rho = l
        .svd(true, true)
        .solve(&DVector::from_column_slice(target_sq), 1e-14)
        .ok()?;
    // rho is ordered (0,0), (0,1), ..., (0,dims-1), (1,1), ...
    let b0 = rho[0].abs().sqrt();
    if !(b0 > 0.0) {
        return None;
    }
    let mut betas = vec![b0];
    if dims == 2 {
        betas.push(rho[1].signum() * rho[2].abs().sqrt());
    } else {
        betas.extend((1..dims).map(|a| rho[a] / b0));
    }
    Some(betas)
}

/// Gauss–Newton on `‖Σ β_a Δv_a‖² − ‖Δc_w‖²` over all control-point pairs.
fn refine_betas(betas: &mut [f64], deltas: &[Vec<Vector3<f64>>], target_sq: &[f64]) {
    let dims = betas.len();
    let residuals = |betas: &[f64]| -> Vec<(f64, Vector3<f64>)> {
        deltas
            .iter()
            .zip(target_sq)
            .map(|(d, &t)| {
                let combined = d.iter().zip(betas).fold(Vector3::zeros(), |acc, (v, b)| acc + v * *b);
                (combined.norm_squared() - t, combined)
            })
            .collect()
    };
    let cost = |r: &[(f64, Vector3<f64>)]| r.iter().map(|(e, _)| e * e).sum::<f64>();

    let mut current = residuals(betas);
    let mut current_cost = cost(&current);
    for _ in 0..BETA_GN_ITERS {
        let mut jtj = DMatrix::<f64>::zeros(dims, dims);
        let mut jtr = DVector::<f64>::zeros(dims);
        for ((e, combined), d) in current.iter().zip(deltas) {
            let row: Vec<f64> = d.iter().map(|v| 2.0 * combined.dot(v)).collect();
            for a in 0..dims {
                jtr[a] += row[a] * e;
                for b in 0..dims {
                    jtj[(a, b)] += row[a] * row[b];
                }
            }
        }
        let Some(step) = jtj.lu().solve(&(-jtr)) else {
            break;
        };
        let trial: Vec<f64> = betas.iter().zip(step.iter()).map(|(b, s)| b + s).collect();
        let trial_res = residuals(&trial);
        let trial_cost = cost(&trial_res);
        if !(trial_cost < current_cost) {
            break;
        }
        betas.copy_from_slice(&trial);
        current = trial_res;
        current_cost = trial_cost;
    }
}

fn pose_from_betas(
    betas: &[f64],
    null_vectors: &[DVector<f64>],
    alphas: &[Vec<f64>],
    c: &CorrespondenceSet,
) -> Option<RigidTransform> {
    let m = alphas[0].len();
    let combined = null_vectors
        .iter()
        .zip(betas)
        .fold(DVector::<f64>::zeros(3 * m), |acc, (v, b)| acc + v * *b);
    let controls: Vec<Vector3<f64>> = (0..m).map(|k| control(&combined, k)).collect();
    let mut camera_points: Vec<WorldPoint> = alphas
        .iter()
        .map(|alpha| {
            WorldPoint::from(
                alpha
                    .iter()
                    .zip(&controls)
                    .fold(Vector3::zeros(), |acc, (a, ctl)| acc + ctl * *a),
            )
        })
        .collect();
    // the null space is sign-free; put the object in front of the source
    let mean_depth = camera_points.iter().map(|p| p.z).sum::<f64>();
    if mean_depth < 0.0 {
        camera_points.iter_mut().for_each(|p| p.coords = -p.coords);
    }
    register_point_sets(&c.object_points, &camera_points)
        .ok()
        .map(|r| r.transform)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{project_points, AcquisitionGeometry};
    use crate::test_support::{box_points, perturbed_pose, rotation_error_deg, seeded};
    use nalgebra::Point2;
    use rand::Rng;

    fn geom() -> AcquisitionGeometry {
        AcquisitionGeometry::new(1000.0, 1.0, 1.0, [480.0, 371.0], [960, 742]).unwrap()
    }

    fn correspondences(points: &[WorldPoint], pose: &RigidTransform, g: &AcquisitionGeometry) -> CorrespondenceSet {
        let px = project_points(points, pose, g).unwrap();
        CorrespondenceSet::new(points.to_vec(), px, g).unwrap()
    }

    #[test]
    fn recovers_random_poses_exactly() {
        let mut rng = seeded(11);
        let pts = box_points(30.0);
        for _ in 0..200 {
            let pose = perturbed_pose(&mut rng, 45.0, 700.0);
            let g = AcquisitionGeometry::new(rng.random_range(950.0..1230.0), 2.0, 2.0, [240.0, 185.5], [960, 742]).unwrap();
            let sol = solve_epnp(&correspondences(&pts, &pose, &g)).unwrap();
            assert!((sol.pose.translation - pose.translation).norm() < 1e-6);
            assert!(rotation_error_deg(&sol.pose, &pose) < 1e-6);
            assert_eq!(sol.refinement_iterations, 0);
        }
    }

    #[test]
    fn identity_pose_reprojects_exactly() {
        let pose = RigidTransform::from_translation(Vector3::new(0.0, 0.0, 1000.0));
        let sol = solve_epnp(&correspondences(&box_points(30.0), &pose, &geom())).unwrap();
        assert!(sol.mean_reprojection_error_px < 1e-9);
    }

    #[test]
    fn planar_board_is_handled() {
        let board: Vec<WorldPoint> = (0..6)
            .flat_map(|i| (0..4).map(move |j| WorldPoint::new(i as f64 * 25.0, j as f64 * 25.0, 0.0)))
            .collect();
        let mut rng = seeded(5);
        for _ in 0..50 {
            let pose = perturbed_pose(&mut rng, 40.0, 800.0);
            let sol = solve_epnp(&correspondences(&board, &pose, &geom())).unwrap();
            assert!(sol.mean_reprojection_error_px < 1e-6, "{}", sol.mean_reprojection_error_px);
        }
    }

    #[test]
    fn mirrored_intrinsics_give_the_same_pose() {
        let mut rng = seeded(3);
        let pts = box_points(30.0);
        let g = geom();
        for _ in 0..20 {
            let pose = perturbed_pose(&mut rng, 45.0, 700.0);
            let c = correspondences(&pts, &pose, &g);
            let mut flipped = c.camera;
            flipped.fv = -flipped.fv;
            flipped.cv = -flipped.cv;
            let mirrored: Vec<_> = c.image_points.iter().map(|p| Point2::new(p.x, -p.y)).collect();
            let c2 = CorrespondenceSet::with_pinhole(pts.clone(), mirrored, flipped).unwrap();
            let a = solve_epnp(&c).unwrap().pose;
            let b = solve_epnp(&c2).unwrap().pose;
            assert!(a.max_abs_diff(&b) < 1e-9);
        }
    }

    #[test]
    fn permutation_invariant() {
        let mut rng = seeded(8);
        let pose = perturbed_pose(&mut rng, 45.0, 700.0);
        let c = correspondences(&box_points(30.0), &pose, &geom());
        let mut idx: Vec<usize> = (0..c.len()).collect();
        idx.reverse();
        idx.swap(0, 4);
        let c2 = CorrespondenceSet::new(
            idx.iter().map(|&i| c.object_points[i]).collect(),
            idx.iter().map(|&i| c.image_points[i]).collect(),
            &geom(),
        )
        .unwrap();
        let a = solve_epnp(&c).unwrap().pose;
        let b = solve_epnp(&c2).unwrap().pose;
        assert!(a.max_abs_diff(&b) < 1e-8);
    }

    #[test]
    fn error_paths() {
        let g = geom();
        let pose = RigidTransform::from_translation(Vector3::new(0.0, 0.0, 900.0));
        let few = correspondences(&box_points(30.0)[..3], &pose, &g);
        assert_eq!(
            solve_epnp(&few),
            Err(PnpError::InsufficientCorrespondences { got: 3, need: 4 })
        );
        let line: Vec<WorldPoint> = (0..6).map(|i| WorldPoint::new(i as f64, 2.0 * i as f64, 0.0)).collect();
        assert!(matches!(
            solve_epnp(&correspondences(&line, &pose, &g)),
            Err(PnpError::Degenerate(_))
        ));
    }
}
