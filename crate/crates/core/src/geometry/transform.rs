use nalgebra::{Matrix3, Matrix4, Rotation3, Unit, Vector3};

use super::{GeometryError, WorldPoint};

const ORTHONORMAL_TOL: f64 = 1e-9;

/// Element of SE(3): `x ↦ R·x + C`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Checked constructor; `rotation` must satisfy `RᵀR = I` and `det R = +1`
    /// to within 1e-9.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        let t = Self {
            rotation,
            translation,
        };
        let deviation = t.orthonormality_deviation();
        if deviation > ORTHONORMAL_TOL || !translation.iter().all(|c| c.is_finite()) {
            return Err(GeometryError::InvalidRotation { deviation });
        }
        Ok(t)
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    pub fn from_axis_angle(axis: &Vector3<f64>, angle_rad: f64, translation: Vector3<f64>) -> Self {
        let rotation = Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle_rad);
        Self {
            rotation: *rotation.matrix(),
            translation,
        }
    }

    /// Rotation from a tangent-space vector (axis · angle).
    pub fn from_rotation_vector(omega: &Vector3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: *Rotation3::new(*omega).matrix(),
            translation,
        }
    }

    /// `R = R_z(rz) · R_y(ry) · R_x(rx)`, angles in degrees.
    pub fn from_euler_deg(rx: f64, ry: f64, rz: f64, translation: Vector3<f64>) -> Self {
        let rotation = Rotation3::from_axis_angle(&Vector3::z_axis(), rz.to_radians())
            * Rotation3::from_axis_angle(&Vector3::y_axis(), ry.to_radians())
            * Rotation3::from_axis_angle(&Vector3::x_axis(), rx.to_radians());
        Self {
            rotation: *rotation.matrix(),
            translation,
        }
    }

    /// Inverse of [`from_euler_deg`](Self::from_euler_deg) for `|ry| < 90°`.
    pub fn euler_deg(&self) -> (f64, f64, f64) {
        let r = &self.rotation;
        let ry = (-r[(2, 0)]).clamp(-1.0, 1.0).asin();
        let rx = r[(2, 1)].atan2(r[(2, 2)]);
        let rz = r[(1, 0)].atan2(r[(0, 0)]);
        (rx.to_degrees(), ry.to_degrees(), rz.to_degrees())
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Exact SE(3) inverse `(Rᵀ, −Rᵀ·C)`.
    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn apply(&self, p: &WorldPoint) -> WorldPoint {
        WorldPoint::from(self.rotation * p.coords + self.translation)
    }

    /// Max absolute deviation of `RᵀR` from `I`, or of `det R` from 1.
    pub fn orthonormality_deviation(&self) -> f64 {
        let gram = self.rotation.transpose() * self.rotation - Matrix3::identity();
        let gram_dev = gram.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let det_dev = (self.rotation.determinant() - 1.0).abs();
        if gram_dev.is_nan() || det_dev.is_nan() {
            return f64::INFINITY;
        }
        gram_dev.max(det_dev)
    }

    /// Projects the rotation back onto SO(3) (nearest in Frobenius norm).
    pub fn reorthonormalized(&self) -> RigidTransform {
        RigidTransform {
            rotation: nearest_rotation(&self.rotation),
            translation: self.translation,
        }
    }

    /// Geodesic angle between the two rotations, radians in `[0, π]`.
    ///
    /// Equals `arccos((tr(RᵀR̄) − 1)/2)`; evaluated through `atan2` so that
    /// angles near zero keep full precision.
    pub fn rotation_angle_to(&self, other: &RigidTransform) -> f64 {
        let rel = self.rotation.transpose() * other.rotation;
        let cos = (rel.trace() - 1.0) / 2.0;
        let sin = Vector3::new(
            rel[(2, 1)] - rel[(1, 2)],
            rel[(0, 2)] - rel[(2, 0)],
            rel[(1, 0)] - rel[(0, 1)],
        )
        .norm()
            / 2.0;
        sin.atan2(cos.clamp(-1.0, 1.0))
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Row-major `R` followed by `C`, the order used in record files.
    pub fn to_row_major(&self) -> ([f64; 9], [f64; 3]) {
        let r = &self.rotation;
        (
            [
                r[(0, 0)],
                r[(0, 1)],
                r[(0, 2)],
                r[(1, 0)],
                r[(1, 1)],
                r[(1, 2)],
                r[(2, 0)],
                r[(2, 1)],
                r[(2, 2)],
            ],
            [self.translation.x, self.translation.y, self.translation.z],
        )
    }

    pub fn from_row_major(r: &[f64; 9], c: &[f64; 3]) -> Result<Self, GeometryError> {
        Self::new(Matrix3::from_row_slice(r), Vector3::from_column_slice(c))
    }

    /// Max absolute element difference of rotation and translation.
    pub fn max_abs_diff(&self, other: &RigidTransform) -> f64 {
        let r = (self.rotation - other.rotation).amax();
        let t = (self.translation - other.translation).amax();
        r.max(t)
    }
}

pub(crate) fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    u * d * v_t
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> RigidTransform {
        RigidTransform::from_euler_deg(20.0, -35.0, 110.0, Vector3::new(3.0, -40.0, 720.0))
    }

    #[test]
    fn compose_with_identity() {
        let t = sample();
        assert_eq!(t.compose(&RigidTransform::identity()), t);
        assert!(t.compose(&t.inverse()).max_abs_diff(&RigidTransform::identity()) < 1e-9);
    }

    #[test]
    fn quarter_turns_compose_to_half_turn() {
        let q = RigidTransform::from_axis_angle(&Vector3::z(), std::f64::consts::FRAC_PI_2, Vector3::zeros());
        let h = RigidTransform::from_axis_angle(&Vector3::z(), std::f64::consts::PI, Vector3::zeros());
        assert!(q.compose(&q).max_abs_diff(&h) < 1e-12);
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(RigidTransform::identity().inverse(), RigidTransform::identity());
        let t = RigidTransform::from_translation(Vector3::new(1.0, 2.0, 3.0)).inverse();
        assert_eq!(t.translation, Vector3::new(-1.0, -2.0, -3.0));
        assert!(sample().inverse().inverse().max_abs_diff(&sample()) < 1e-12);
    }

    #[test]
    fn checked_constructor_rejects_reflection() {
        let mut m = Matrix3::identity();
        m[(0, 0)] = -1.0;
        assert!(matches!(
            RigidTransform::new(m, Vector3::zeros()),
            Err(GeometryError::InvalidRotation { .. })
        ));
        assert!(RigidTransform::new(sample().rotation, sample().translation).is_ok());
    }

    #[test]
    fn euler_round_trip() {
        let (rx, ry, rz) = sample().euler_deg();
        assert!((rx - 20.0).abs() < 1e-10);
        assert!((ry + 35.0).abs() < 1e-10);
        assert!((rz - 110.0).abs() < 1e-10);
    }

    #[test]
    fn row_major_round_trip() {
        let (r, c) = sample().to_row_major();
        let back = RigidTransform::from_row_major(&r, &c).unwrap();
        assert_eq!(back, sample());
        let h = sample().to_homogeneous();
        assert_eq!(h[(0, 1)], r[1]);
        assert_eq!(h[(2, 3)], c[2]);
    }

    fn arb_transform() -> impl Strategy<Value = RigidTransform> {
        (
            prop::array::uniform3(-3.0..3.0f64),
            prop::array::uniform3(-500.0..500.0f64),
        )
            .prop_map(|(w, t)| {
                RigidTransform::from_rotation_vector(&Vector3::from(w), Vector3::from(t))
            })
    }

    proptest! {
        #[test]
        fn group_invariants(a in arb_transform(), b in arb_transform()) {
            prop_assert!(a.orthonormality_deviation() < 1e-9);
            prop_assert!(a.compose(&b).orthonormality_deviation() < 1e-9);
            prop_assert!(a.compose(&a.inverse()).max_abs_diff(&RigidTransform::identity()) < 1e-9);
            let p = WorldPoint::new(1.0, -2.0, 3.0);
            let lhs = a.compose(&b).apply(&p);
            let rhs = a.apply(&b.apply(&p));
            prop_assert!((lhs - rhs).norm() < 1e-9);
        }
    }
}
