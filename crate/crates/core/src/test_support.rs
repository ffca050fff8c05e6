use nalgebra::{Point2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::{Pixel, RigidTransform, WorldPoint};

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Centre plus the eight corners of an axis-aligned cube.
pub fn box_points(size: f64) -> Vec<WorldPoint> {
    let h = size / 2.0;
    let mut pts = vec![WorldPoint::origin()];
    for &x in &[-h, h] {
        for &y in &[-h, h] {
            for &z in &[-h, h] {
                pts.push(WorldPoint::new(x, y, z));
            }
        }
    }
    pts
}

/// Euler angles within `±max_deg`, depth around `depth` mm.
pub fn perturbed_pose(rng: &mut impl Rng, max_deg: f64, depth: f64) -> RigidTransform {
    let mut angle = || rng.random_range(-max_deg..=max_deg);
    let (rx, ry, rz) = (angle(), angle(), angle());
    let t = Vector3::new(
        rng.random_range(-40.0..40.0),
        rng.random_range(-40.0..40.0),
        depth + rng.random_range(-40.0..40.0),
    );
    RigidTransform::from_euler_deg(rx, ry, rz, t)
}

pub fn random_transform(rng: &mut impl Rng, max_t: f64) -> RigidTransform {
    let axis = Vector3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    let t = Vector3::new(
        rng.random_range(-max_t..max_t),
        rng.random_range(-max_t..max_t),
        rng.random_range(-max_t..max_t),
    );
    RigidTransform::from_axis_angle(&axis, rng.random_range(0.0..std::f64::consts::PI), t)
}

pub fn rotation_error_deg(a: &RigidTransform, b: &RigidTransform) -> f64 {
    a.rotation_angle_to(b).to_degrees()
}

pub fn gaussian_jitter(rng: &mut impl Rng, px: &[Pixel], sigma: f64) -> Vec<Pixel> {
    let normal = Normal::new(0.0, sigma).unwrap();
    px.iter()
        .map(|p| Point2::new(p.x + normal.sample(rng), p.y + normal.sample(rng)))
        .collect()
}
