//! Pose recovery from 2D/3D correspondences and rigid point-set registration.
//!
//! [`solve_epnp`] is the closed-form EPnP solver (four control points, or
//! three for planar targets), [`refine_gauss_newton`] polishes any initial
//! pose by minimising pixel reprojection error, and [`register_point_sets`]
//! is the SVD-based least-squares alignment used to link coordinate systems.

mod epnp;
mod refine;
mod registration;

pub use epnp::solve_epnp;
pub use refine::{refine_gauss_newton, RefineOptions};
pub use registration::{register_point_sets, Registration};

use thiserror::Error;

use crate::geometry::{AcquisitionGeometry, GeometryError, Pinhole, Pixel, RigidTransform, WorldPoint};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PnpError {
    #[error("need at least {need} correspondences, got {got}")]
    InsufficientCorrespondences { got: usize, need: usize },
    #[error("point lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("degenerate configuration: {0}")]
    Degenerate(&'static str),
    #[error("no candidate pose places the points in front of the source")]
    NoValidPose,
    #[error("numerical failure during refinement")]
    NumericalFailure { last: RigidTransform },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Paired object-frame points and their observed pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet {
    pub object_points: Vec<WorldPoint>,
    pub image_points: Vec<Pixel>,
    pub camera: Pinhole,
}

impl CorrespondenceSet {
    pub fn new(
        object_points: Vec<WorldPoint>,
        image_points: Vec<Pixel>,
        geom: &AcquisitionGeometry,
    ) -> Result<Self, PnpError> {
        geom.validate()?;
        Self::with_pinhole(object_points, image_points, geom.pinhole())
    }

    pub fn with_pinhole(
        object_points: Vec<WorldPoint>,
        image_points: Vec<Pixel>,
        camera: Pinhole,
    ) -> Result<Self, PnpError> {
        if object_points.len() != image_points.len() {
            return Err(PnpError::LengthMismatch(
                object_points.len(),
                image_points.len(),
            ));
        }
        if !camera.is_valid() {
            return Err(GeometryError::InvalidGeometry("non-finite or zero focal length".into()).into());
        }
        Ok(Self {
            object_points,
            image_points,
            camera,
        })
    }

    pub fn len(&self) -> usize {
        self.object_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.object_points.is_empty()
    }

    /// Mean Euclidean pixel distance between observed and reprojected points,
    /// or `None` if any point lands behind the source.
    pub fn mean_reprojection_error(&self, pose: &RigidTransform) -> Option<f64> {
        let mut sum = 0.0;
        for (x, obs) in self.object_points.iter().zip(&self.image_points) {
            let px = self.camera.project(&pose.apply(x).coords)?;
            sum += (px - obs).norm();
        }
        Some(sum / self.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PnPSolution {
    pub pose: RigidTransform,
    pub mean_reprojection_error_px: f64,
    /// Accepted Gauss–Newton steps; zero for the closed-form solution.
    pub refinement_iterations: usize,
}

/// EPnP followed by Gauss–Newton refinement with default options.
pub fn solve_pose(c: &CorrespondenceSet) -> Result<PnPSolution, PnpError> {
    let initial = solve_epnp(c)?;
    let refined = refine_gauss_newton(c, &initial.pose, &RefineOptions::default())?;
    // refinement is monotone, but keep the closed form if it was already exact
    if refined.mean_reprojection_error_px <= initial.mean_reprojection_error_px {
        Ok(refined)
    } else {
        Ok(initial)
    }
}

/// Board pose in the optical camera frame from fiducial correspondences.
pub fn estimate_board_pose(
    fiducials_3d: &[WorldPoint],
    detections_2d: &[Pixel],
    geom: &AcquisitionGeometry,
) -> Result<PnPSolution, PnpError> {
    let c = CorrespondenceSet::new(fiducials_3d.to_vec(), detections_2d.to_vec(), geom)?;
    solve_pose(&c)
}
