use nalgebra::{Matrix2x3, Matrix3, Matrix6, Vector3, Vector6};

use super::{CorrespondenceSet, PnPSolution, PnpError};
use crate::geometry::RigidTransform;

/// Stopping rules for [`refine_gauss_newton`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineOptions {
    pub max_iters: usize,
    /// Relative decrease of the mean reprojection error below which
    /// iteration stops.
    pub tol: f64,
    /// Step halvings tried before a step is rejected.
    pub max_halvings: usize,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self {
            max_iters: 50,
            tol: 1e-10,
            max_halvings: 8,
        }
    }
}

/// Mean residuals at or below this (px) are treated as converged.
const MEAN_FLOOR_PX: f64 = 1e-12;

/// Gauss–Newton refinement of `init` on the pixel reprojection residuals.
///
/// Rotation increments live in the tangent space (`R ← exp(ω)·R`),
/// translation is updated additively. Steps come from the squared-residual
/// normal equations, but a step is accepted only if it lowers the mean
/// reprojection error, so the reported error never increases. Rejected steps
/// are halved up to `max_halvings` times before iteration stops.
pub fn refine_gauss_newton(
    c: &CorrespondenceSet,
    init: &RigidTransform,
    opts: &RefineOptions,
) -> Result<PnPSolution, PnpError> {
    if c.is_empty() {
        return Err(PnpError::InsufficientCorrespondences { got: 0, need: 1 });
    }
    let mut pose = *init;
    let mut cost = mean_error(c, &pose).ok_or(PnpError::NumericalFailure { last: pose })?;
    let mut accepted = 0;

    while accepted < opts.max_iters && cost > MEAN_FLOOR_PX {
        let (jtj, jtr) = normal_equations(c, &pose);
        let Some(delta) = jtj.cholesky().map(|ch| ch.solve(&(-jtr))) else {
            break;
        };
        if !delta.iter().all(|d| d.is_finite()) {
            return Err(PnpError::NumericalFailure { last: pose });
        }

        let mut scale = 1.0;
        let mut next = None;
        for _ in 0..=opts.max_halvings {
            let trial = apply_increment(&pose, &(delta * scale));
            if let Some(trial_cost) = mean_error(c, &trial) {
                if trial_cost < cost {
                    next = Some((trial, trial_cost));
                    break;
                }
            }
            scale *= 0.5;
        }
        let Some((trial, trial_cost)) = next else {
            break;
        };
        let rel = (cost - trial_cost) / cost;
        pose = trial;
        cost = trial_cost;
        accepted += 1;
        if rel < opts.tol {
            break;
        }
    }

    Ok(PnPSolution {
        pose,
        mean_reprojection_error_px: cost,
        refinement_iterations: accepted,
    })
}

fn mean_error(c: &CorrespondenceSet, pose: &RigidTransform) -> Option<f64> {
    c.mean_reprojection_error(pose).filter(|e| e.is_finite())
}

#[cfg(test)]
fn squared_cost(c: &CorrespondenceSet, pose: &RigidTransform) -> Option<f64> {
    let mut sum = 0.0;
    for (x, obs) in c.object_points.iter().zip(&c.image_points) {
        let px = c.camera.project(&pose.apply(x).coords)?;
        sum += (px - obs).norm_squared();
    }
    sum.is_finite().then_some(sum)
}

fn normal_equations(c: &CorrespondenceSet, pose: &RigidTransform) -> (Matrix6<f64>, Vector6<f64>) {
    let cam = &c.camera;
    let mut jtj = Matrix6::zeros();
    let mut jtr = Vector6::zeros();
    for (x, obs) in c.object_points.iter().zip(&c.image_points) {
        let rotated = pose.rotation * x.coords;
        let p = rotated + pose.translation;
        let inv_z = 1.0 / p.z;
        let residual = nalgebra::Vector2::new(
            cam.fu * p.x * inv_z + cam.cu - obs.x,
            cam.fv * p.y * inv_z + cam.cv - obs.y,
        );
        let d_proj = Matrix2x3::new(
            cam.fu * inv_z,
            0.0,
            -cam.fu * p.x * inv_z * inv_z,
            0.0,
            cam.fv * inv_z,
            -cam.fv * p.y * inv_z * inv_z,
        );
        // ∂p/∂ω = −[R·x]ₓ, ∂p/∂t = I
        let d_rot = d_proj * -skew(&rotated);
        let mut j = nalgebra::Matrix2x6::zeros();
        j.fixed_view_mut::<2, 3>(0, 0).copy_from(&d_rot);
        j.fixed_view_mut::<2, 3>(0, 3).copy_from(&d_proj);
        jtj += j.transpose() * j;
        jtr += j.transpose() * residual;
    }
    (jtj, jtr)
}

fn apply_increment(pose: &RigidTransform, delta: &Vector6<f64>) -> RigidTransform {
    let omega = Vector3::new(delta[0], delta[1], delta[2]);
    let step = RigidTransform::from_rotation_vector(&omega, Vector3::zeros());
    RigidTransform {
        rotation: step.rotation * pose.rotation,
        translation: pose.translation + Vector3::new(delta[3], delta[4], delta[5]),
    }
    .reorthonormalized()
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}
