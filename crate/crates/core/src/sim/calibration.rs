use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{check_noise, stream_rng, Purpose, SimError};
use crate::geometry::{AcquisitionGeometry, Pixel, RigidTransform, WorldPoint};

/// Planar fiducial layout in the board frame (`z = 0`, mm).
#[derive(Debug, Clone, PartialEq)]
pub struct FiducialBoard {
    pub points: Vec<WorldPoint>,
}

impl FiducialBoard {
    /// Inner chessboard corners of a `squares_x × squares_y` board,
    /// centred on the origin.
    pub fn charuco(squares_x: usize, squares_y: usize, square_mm: f64) -> Self {
        let (nx, ny) = (squares_x.saturating_sub(1), squares_y.saturating_sub(1));
        let (ox, oy) = (
            (nx as f64 - 1.0) * square_mm / 2.0,
            (ny as f64 - 1.0) * square_mm / 2.0,
        );
        let mut points = Vec::with_capacity(nx * ny);
        for y in 0..ny {
            for x in 0..nx {
                points.push(WorldPoint::new(
                    x as f64 * square_mm - ox,
                    y as f64 * square_mm - oy,
                    0.0,
                ));
            }
        }
        Self { points }
    }
}

impl Default for FiducialBoard {
    /// 7 × 5 squares of 30 mm: 24 corners.
    fn default() -> Self {
        Self::charuco(7, 5, 30.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoardObservation {
    pub detections_2d: Vec<Pixel>,
    /// Board-frame positions of the detected fiducials, same order.
    pub fiducials_3d: Vec<WorldPoint>,
}

/// Projects the board into the optical camera at `board_to_camera` and adds
/// isotropic Gaussian pixel noise. Fiducials behind the camera or outside
/// the image (before noise) are dropped.
pub fn simulate_fiducial_board(
    board: &FiducialBoard,
    camera: &AcquisitionGeometry,
    board_to_camera: &RigidTransform,
    noise_px: f64,
    seed: u64,
) -> Result<BoardObservation, SimError> {
    check_noise(noise_px)?;
    camera.validate()?;
    let pinhole = camera.pinhole();
    let mut rng = stream_rng(seed, Purpose::Board, 0);
    let mut obs = BoardObservation { detections_2d: Vec::new(), fiducials_3d: Vec::new() };
    for p in &board.points {
        let (du, dv): (f64, f64) = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
        let Some(px) = pinhole.project(&board_to_camera.apply(p).coords) else {
            continue;
        };
        if !camera.contains(&px) {
            continue;
        }
        obs.detections_2d.push(Pixel::new(px.x + noise_px * du, px.y + noise_px * dv));
        obs.fiducials_3d.push(*p);
    }
    if obs.detections_2d.is_empty() {
        return Err(SimError::AllOutOfFrame);
    }
    Ok(obs)
}

/// Placement of the calibration dome's marker centres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomeLayout {
    /// Evenly spread over a hemisphere (Fibonacci spiral).
    Hemisphere { radius_mm: f64 },
    /// All markers on one line; registration must reject this.
    Collinear { spacing_mm: f64 },
}

impl Default for DomeLayout {
    fn default() -> Self {
        DomeLayout::Hemisphere { radius_mm: 100.0 }
    }
}

impl DomeLayout {
    pub fn points(&self, n: usize) -> Vec<WorldPoint> {
        match *self {
            DomeLayout::Hemisphere { radius_mm } => {
                let golden = PI * (3.0 - 5f64.sqrt());
                (0..n)
                    .map(|k| {
                        let z = 1.0 - (k as f64 + 0.5) / n as f64;
                        let r = (1.0 - z * z).sqrt();
                        let phi = golden * k as f64;
                        WorldPoint::new(r * phi.cos(), r * phi.sin(), z) * radius_mm
                    })
                    .collect()
            }
            DomeLayout::Collinear { spacing_mm } => (0..n)
                .map(|k| WorldPoint::new(k as f64 * spacing_mm, 0.0, 0.0))
                .collect(),
        }
    }
}

/// Paired marker centres as seen in the optical and the X-ray frames:
/// `xray ≈ true_link(optical)`. `noise_mm` is the standard deviation of
/// the per-axis discrepancy between the pair; it is split evenly between
/// the two measurements.
pub fn simulate_dome_link(
    n_points: usize,
    layout: DomeLayout,
    true_link: &RigidTransform,
    noise_mm: f64,
    seed: u64,
) -> Result<(Vec<WorldPoint>, Vec<WorldPoint>), SimError> {
    if n_points < 3 {
        return Err(SimError::TooFewPoints(n_points));
    }
    check_noise(noise_mm)?;
    let sigma = noise_mm / 2f64.sqrt();
    let mut rng = stream_rng(seed, Purpose::Dome, 0);
    let mut jitter = |p: WorldPoint| {
        let d: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
        WorldPoint::new(p.x + sigma * d[0], p.y + sigma * d[1], p.z + sigma * d[2])
    };
    let mut optical = Vec::with_capacity(n_points);
    let mut xray = Vec::with_capacity(n_points);
    for p in layout.points(n_points) {
        optical.push(jitter(p));
        xray.push(jitter(true_link.apply(&p)));
    }
    Ok((optical, xray))
}

/// Seeded random optical-to-X-ray link: uniformly distributed axis, angle
/// up to `max_angle_deg`, translation components within `±max_translation_mm`.
pub fn sample_link(seed: u64, trial: u64, max_angle_deg: f64, max_translation_mm: f64) -> RigidTransform {
    let mut rng = stream_rng(seed, Purpose::Link, trial);
    let axis = loop {
        let v = Vector3::<f64>::from_fn(|_, _| StandardNormal.sample(&mut rng));
        if v.norm() > 1e-6 {
            break v;
        }
    };
    let angle = rng.random_range(0.0..=max_angle_deg).to_radians();
    let t = Vector3::from_fn(|_, _| rng.random_range(-max_translation_mm..=max_translation_mm));
    RigidTransform::from_axis_angle(&axis, angle, t)
}
