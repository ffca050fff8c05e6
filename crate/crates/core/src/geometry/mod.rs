//! Cone-beam X-ray acquisition model.
//!
//! The X-ray source is treated as the centre of a pinhole camera and the flat
//! panel detector as its image plane. A point `X` in the object frame maps to
//! pixel `(u, v)` through
//!
//! ```text
//! λ [u v 1]ᵀ = K [R | C] [X 1]ᵀ
//!
//!     | k_u·f    0      k_u·x_0 |
//! K = |   0   −k_v·f    k_v·y_0 |
//!     |   0      0         1    |
//! ```
//!
//! where `f` is the source-image distance (SID), `k_u`, `k_v` the pixel
//! densities and `(x_0, y_0)` the principal point offset. The negative `v`
//! focal entry is kept as is; every consumer of [`AcquisitionGeometry`] must
//! accept it.
//!
//! Lengths are millimetres, image coordinates are pixels.

mod chain;
mod transform;

pub use chain::{FrameChain, FrameLink};
pub use transform::RigidTransform;

use nalgebra::{Matrix3, Point2, Point3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Pixel coordinates `(u, v)`.
pub type Pixel = Point2<f64>;
/// World or camera-frame coordinates in millimetres.
pub type WorldPoint = Point3<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid acquisition geometry: {0}")]
    InvalidGeometry(String),
    #[error("rotation matrix is not orthonormal with det +1 (max deviation {deviation:e})")]
    InvalidRotation { deviation: f64 },
    #[error("point {index} lies at or behind the source plane (z = {depth})")]
    BehindSource { index: usize, depth: f64 },
    #[error("unknown frame `{0}`")]
    UnknownFrame(String),
    #[error("no chain of links connects `{from}` to `{to}`")]
    Disconnected { from: String, to: String },
}

/// Intrinsic acquisition parameters of a single X-ray frame.
///
/// These change at run time on a C-arm (SID, zoom/field of view), so every
/// frame carries its own copy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionGeometry {
    /// Source-image distance `f` in mm.
    pub focal_length_mm: f64,
    /// Horizontal pixel density `k_u` in px/mm.
    pub pixel_density_u: f64,
    /// Vertical pixel density `k_v` in px/mm.
    pub pixel_density_v: f64,
    /// Principal point offset `(x_0, y_0)` in mm.
    pub principal_offset_mm: [f64; 2],
    /// Image size `(width, height)` in pixels.
    pub image_size_px: [u32; 2],
}

impl AcquisitionGeometry {
    pub fn new(
        focal_length_mm: f64,
        pixel_density_u: f64,
        pixel_density_v: f64,
        principal_offset_mm: [f64; 2],
        image_size_px: [u32; 2],
    ) -> Result<Self, GeometryError> {
        let geom = Self {
            focal_length_mm,
            pixel_density_u,
            pixel_density_v,
            principal_offset_mm,
            image_size_px,
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let positive = |name: &str, value: f64| {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(GeometryError::InvalidGeometry(format!(
                    "{name} must be positive and finite, got {value}"
                )))
            }
        };
        positive("focal length", self.focal_length_mm)?;
        positive("k_u", self.pixel_density_u)?;
        positive("k_v", self.pixel_density_v)?;
        if !self.principal_offset_mm.iter().all(|c| c.is_finite()) {
            return Err(GeometryError::InvalidGeometry(
                "principal offset must be finite".into(),
            ));
        }
        if self.image_size_px.contains(&0) {
            return Err(GeometryError::InvalidGeometry(
                "image size must be non-zero".into(),
            ));
        }
        Ok(())
    }

    /// Builds `K` exactly as in the acquisition model, including the
    /// negative `(2,2)` entry.
    pub fn intrinsics(&self) -> Result<Matrix3<f64>, GeometryError> {
        self.validate()?;
        Ok(self.intrinsics_unchecked())
    }

    pub(crate) fn intrinsics_unchecked(&self) -> Matrix3<f64> {
        let (f, ku, kv) = (
            self.focal_length_mm,
            self.pixel_density_u,
            self.pixel_density_v,
        );
        let [x0, y0] = self.principal_offset_mm;
        Matrix3::new(ku * f, 0.0, ku * x0, 0.0, -kv * f, kv * y0, 0.0, 0.0, 1.0)
    }

    /// The equivalent signed pinhole used by the solvers.
    pub fn pinhole(&self) -> Pinhole {
        let (fu, fv) = self.focal_px();
        let (cu, cv) = self.principal_point_px();
        Pinhole { fu, fv, cu, cv }
    }

    /// Signed focal lengths in pixels `(k_u·f, −k_v·f)`.
    pub fn focal_px(&self) -> (f64, f64) {
        (
            self.pixel_density_u * self.focal_length_mm,
            -self.pixel_density_v * self.focal_length_mm,
        )
    }

    /// Principal point in pixels `(k_u·x_0, k_v·y_0)`.
    pub fn principal_point_px(&self) -> (f64, f64) {
        (
            self.pixel_density_u * self.principal_offset_mm[0],
            self.pixel_density_v * self.principal_offset_mm[1],
        )
    }

    pub fn width(&self) -> f64 {
        f64::from(self.image_size_px[0])
    }

    pub fn height(&self) -> f64 {
        f64::from(self.image_size_px[1])
    }

    /// True when the pixel lies inside `[0, W) × [0, H)`.
    pub fn contains(&self, p: &Pixel) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x < self.width() && p.y < self.height()
    }

    /// Projects a point already expressed in the source frame.
    pub fn project_camera_point(&self, p: &Vector3<f64>) -> Option<Pixel> {
        self.pinhole().project(p)
    }

    /// Back-projects a pixel to the source-frame point at depth `z`.
    pub fn back_project(&self, pixel: &Pixel, depth: f64) -> WorldPoint {
        let (fu, fv) = self.focal_px();
        let (cu, cv) = self.principal_point_px();
        WorldPoint::new(
            (pixel.x - cu) / fu * depth,
            (pixel.y - cv) / fv * depth,
            depth,
        )
    }
}

/// Plain pinhole intrinsics with signed focal lengths in pixels.
///
/// `fv` is negative for geometries built from [`AcquisitionGeometry`]. Solvers
/// divide by the signed focal length, which mirrors the `v` axis into a
/// conventional positive-focal frame and back again.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pinhole {
    pub fu: f64,
    pub fv: f64,
    pub cu: f64,
    pub cv: f64,
}

impl Pinhole {
    pub fn project(&self, p: &Vector3<f64>) -> Option<Pixel> {
        if !(p.z > 0.0) {
            return None;
        }
        Some(Pixel::new(
            self.fu * p.x / p.z + self.cu,
            self.fv * p.y / p.z + self.cv,
        ))
    }

    /// Normalised image-plane coordinates `(x/z, y/z)` of a pixel.
    pub fn normalize(&self, px: &Pixel) -> (f64, f64) {
        ((px.x - self.cu) / self.fu, (px.y - self.cv) / self.fv)
    }

    pub fn is_valid(&self) -> bool {
        [self.fu, self.fv, self.cu, self.cv]
            .iter()
            .all(|v| v.is_finite())
            && self.fu != 0.0
            && self.fv != 0.0
    }
}

/// Projects object-frame points through `pose` and `geom`.
///
/// Fails with [`GeometryError::BehindSource`] naming the first point whose
/// source-frame depth is not strictly positive.
pub fn project_points(
    points: &[WorldPoint],
    pose: &RigidTransform,
    geom: &AcquisitionGeometry,
) -> Result<Vec<Pixel>, GeometryError> {
    geom.validate()?;
    points
        .iter()
        .enumerate()
        .map(|(index, p)| {
            let cam = pose.apply(p);
            geom.project_camera_point(&cam.coords)
                .ok_or(GeometryError::BehindSource {
                    index,
                    depth: cam.z,
                })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn reference_geometry() -> AcquisitionGeometry {
        AcquisitionGeometry::new(1000.0, 1.0, 1.0, [480.0, 371.0], [960, 742]).unwrap()
    }

    #[test]
    fn intrinsics_match_substitution() {
        let k = reference_geometry().intrinsics().unwrap();
        assert_eq!(
            k,
            Matrix3::new(1000.0, 0.0, 480.0, 0.0, -1000.0, 371.0, 0.0, 0.0, 1.0)
        );

        let g = AcquisitionGeometry::new(950.0, 2.0, 2.0, [0.0, 0.0], [960, 742]).unwrap();
        assert_eq!(
            g.intrinsics().unwrap(),
            Matrix3::new(1900.0, 0.0, 0.0, 0.0, -1900.0, 0.0, 0.0, 0.0, 1.0)
        );

        let g = AcquisitionGeometry::new(1230.0, 1.0, 1.0, [0.0, 0.0], [960, 742]).unwrap();
        assert_eq!(g.intrinsics().unwrap()[(0, 0)], 1230.0);
    }

    #[test]
    fn intrinsics_determinant_sign() {
        let g = AcquisitionGeometry::new(1100.0, 2.5, 3.0, [10.0, -4.0], [960, 742]).unwrap();
        let det = g.intrinsics().unwrap().determinant();
        assert_abs_diff_eq!(det, -2.5 * 3.0 * 1100.0 * 1100.0, epsilon = 1e-6);
    }

    #[test]
    fn rejects_non_positive_parameters() {
        for (f, ku, kv) in [(0.0, 1.0, 1.0), (1.0, -1.0, 1.0), (1.0, 1.0, 0.0)] {
            let err = AcquisitionGeometry::new(f, ku, kv, [0.0, 0.0], [10, 10]).unwrap_err();
            assert!(matches!(err, GeometryError::InvalidGeometry(_)));
        }
        assert!(AcquisitionGeometry::new(1.0, 1.0, 1.0, [0.0, 0.0], [0, 10]).is_err());
    }

    #[test]
    fn projection_examples() {
        let g = reference_geometry();
        let pose = RigidTransform::identity();
        let px = project_points(
            &[
                WorldPoint::new(0.0, 0.0, 700.0),
                WorldPoint::new(10.0, 0.0, 1000.0),
                WorldPoint::new(0.0, 10.0, 1000.0),
            ],
            &pose,
            &g,
        )
        .unwrap();
        assert_eq!((px[0].x, px[0].y), (480.0, 371.0));
        assert_abs_diff_eq!(px[1].x, 490.0, epsilon = 1e-12);
        assert_abs_diff_eq!(px[1].y, 371.0, epsilon = 1e-12);
        assert_abs_diff_eq!(px[2].x, 480.0, epsilon = 1e-12);
        assert_abs_diff_eq!(px[2].y, 361.0, epsilon = 1e-12);
    }

    #[test]
    fn projection_matches_homogeneous_product() {
        let g = AcquisitionGeometry::new(1100.0, 2.5, 3.0, [10.0, -4.0], [960, 742]).unwrap();
        let pose = RigidTransform::from_euler_deg(12.0, -30.0, 75.0, Vector3::new(5.0, -8.0, 900.0));
        let x = WorldPoint::new(11.0, -7.0, 3.0);
        let h = g.intrinsics().unwrap() * (pose.rotation * x.coords + pose.translation);
        let px = project_points(&[x], &pose, &g).unwrap()[0];
        assert_abs_diff_eq!(px.x, h.x / h.z, epsilon = 1e-9);
        assert_abs_diff_eq!(px.y, h.y / h.z, epsilon = 1e-9);
        // any positive homogeneous scale gives the same pixel
        let scaled = h * 3.7;
        assert_abs_diff_eq!(px.x, scaled.x / scaled.z, epsilon = 1e-9);
    }

    #[test]
    fn behind_source_reports_index() {
        let g = reference_geometry();
        let err = project_points(
            &[WorldPoint::new(0.0, 0.0, 10.0), WorldPoint::new(0.0, 0.0, 0.0)],
            &RigidTransform::identity(),
            &g,
        )
        .unwrap_err();
        assert_eq!(err, GeometryError::BehindSource { index: 1, depth: 0.0 });
    }

    #[test]
    fn offsets_scale_linearly_with_focal_length() {
        let p = WorldPoint::new(13.0, -9.0, 800.0);
        let offset = |f: f64| {
            let g = AcquisitionGeometry::new(f, 2.0, 2.0, [240.0, 185.0], [960, 742]).unwrap();
            let px = project_points(&[p], &RigidTransform::identity(), &g).unwrap()[0];
            (px.x - 480.0, px.y - 370.0)
        };
        let (a, b) = (offset(950.0), offset(1230.0));
        assert_abs_diff_eq!(b.0 / a.0, 1230.0 / 950.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.1 / a.1, 1230.0 / 950.0, epsilon = 1e-12);
    }
}
