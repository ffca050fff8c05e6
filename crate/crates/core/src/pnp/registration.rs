use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use super::PnpError;
use crate::geometry::{RigidTransform, WorldPoint};

const COLLINEAR_TOL: f64 = 1e-12;

/// Least-squares rigid alignment and its residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Registration {
    /// Maps `source` points onto `target` points.
    pub transform: RigidTransform,
    /// Root mean square of `‖T·s_i − t_i‖`.
    pub rms_residual: f64,
}

/// Rigid transform minimising `Σ‖R·s_i + t − t_i‖²` (Kabsch).
///
/// The rotation always has `det = +1`: if the best orthogonal fit is a
/// reflection, the axis of the smallest singular value is flipped.
pub fn register_point_sets(
    source: &[WorldPoint],
    target: &[WorldPoint],
) -> Result<Registration, PnpError> {
    if source.len() != target.len() {
        return Err(PnpError::LengthMismatch(source.len(), target.len()));
    }
    if source.len() < 3 {
        return Err(PnpError::InsufficientCorrespondences {
            got: source.len(),
            need: 3,
        });
    }
    let src_c = centroid(source);
    let dst_c = centroid(target);
    if is_collinear(source, &src_c) || is_collinear(target, &dst_c) {
        return Err(PnpError::Degenerate("registration points are collinear"));
    }

    let cross = source
        .iter()
        .zip(target)
        .fold(Matrix3::zeros(), |acc, (s, t)| {
            acc + (s.coords - src_c) * (t.coords - dst_c).transpose()
        });
    let svd = cross.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(PnpError::Degenerate("singular value decomposition failed")),
    };
    let v = v_t.transpose();
    let mut d = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        // flip the direction of the smallest singular value
        let smallest = svd.singular_values.imin();
        d[(smallest, smallest)] = -1.0;
    }
    let rotation = v * d * u.transpose();
    let transform = RigidTransform {
        rotation,
        translation: dst_c - rotation * src_c,
    };
    let sq: f64 = source
        .iter()
        .zip(target)
        .map(|(s, t)| (transform.apply(s) - t).norm_squared())
        .sum();
    Ok(Registration {
        transform,
        rms_residual: (sq / source.len() as f64).sqrt(),
    })
}

fn centroid(points: &[WorldPoint]) -> Vector3<f64> {
    points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / points.len() as f64
}

fn is_collinear(points: &[WorldPoint], c: &Vector3<f64>) -> bool {
    let cov = points.iter().fold(Matrix3::zeros(), |acc, p| {
        let d = p.coords - c;
        acc + d * d.transpose()
    });
    let mut ev: Vec<f64> = SymmetricEigen::new(cov).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    !(ev[0] > 0.0) || ev[1] <= COLLINEAR_TOL * ev[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::{random_transform, seeded};
    use rand::Rng;

    fn cloud(rng: &mut impl Rng, n: usize) -> Vec<WorldPoint> {
        (0..n)
            .map(|_| {
                WorldPoint::new(
                    rng.random_range(-100.0..100.0),
                    rng.random_range(-100.0..100.0),
                    rng.random_range(-100.0..100.0),
                )
            })
            .collect()
    }

    #[test]
    fn identical_sets_give_identity() {
        let mut rng = seeded(1);
        let pts = cloud(&mut rng, 10);
        let r = register_point_sets(&pts, &pts).unwrap();
        assert!(r.transform.max_abs_diff(&RigidTransform::identity()) < 1e-12);
        assert!(r.rms_residual < 1e-12);
    }

    #[test]
    fn recovers_constructed_transforms() {
        let mut rng = seeded(2);
        for _ in 0..100 {
            let truth = random_transform(&mut rng, 500.0);
            let src = cloud(&mut rng, 10);
            let dst: Vec<_> = src.iter().map(|p| truth.apply(p)).collect();
            let r = register_point_sets(&src, &dst).unwrap();
            assert!(r.transform.max_abs_diff(&truth) < 1e-9);
        }
    }

    #[test]
    fn reflection_is_not_returned() {
        let mut rng = seeded(3);
        let src = cloud(&mut rng, 10);
        let dst: Vec<_> = src.iter().map(|p| WorldPoint::new(-p.x, p.y, p.z)).collect();
        let r = register_point_sets(&src, &dst).unwrap();
        assert!((r.transform.rotation.determinant() - 1.0).abs() < 1e-12);
        assert!(r.transform.orthonormality_deviation() < 1e-9);
        assert!(r.rms_residual > 0.0);
    }

    #[test]
    fn residual_invariant_under_joint_rigid_motion() {
        let mut rng = seeded(4);
        let src = cloud(&mut rng, 12);
        let dst: Vec<_> = cloud(&mut rng, 12);
        let base = register_point_sets(&src, &dst).unwrap().rms_residual;
        for _ in 0..10 {
            let a = random_transform(&mut rng, 300.0);
            let b = random_transform(&mut rng, 300.0);
            let s2: Vec<_> = src.iter().map(|p| a.apply(p)).collect();
            let d2: Vec<_> = dst.iter().map(|p| b.apply(p)).collect();
            let moved = register_point_sets(&s2, &d2).unwrap().rms_residual;
            assert!((moved - base).abs() < 1e-9 * base.max(1.0));
        }
    }

    #[test]
    fn degenerate_inputs() {
        let line: Vec<_> = (0..5).map(|i| WorldPoint::new(i as f64, 0.0, 0.0)).collect();
        assert!(matches!(
            register_point_sets(&line, &line),
            Err(PnpError::Degenerate(_))
        ));
        let two = [WorldPoint::origin(), WorldPoint::new(1.0, 0.0, 0.0)];
        assert!(matches!(
            register_point_sets(&two, &two),
            Err(PnpError::InsufficientCorrespondences { got: 2, need: 3 })
        ));
        assert!(matches!(
            register_point_sets(&line, &line[..4]),
            Err(PnpError::LengthMismatch(5, 4))
        ));
    }
}
