use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{stream_rng, Purpose, SimError};
use crate::geometry::{AcquisitionGeometry, RigidTransform};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub min: f64,
    pub max: f64,
}

impl Interval {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.min && x <= self.max
    }

    fn validate(&self, name: &str) -> Result<(), SimError> {
        if self.min.is_finite() && self.max.is_finite() && self.min <= self.max {
            Ok(())
        } else {
            Err(SimError::InvalidRanges(format!("{name}: [{}, {}]", self.min, self.max)))
        }
    }

    fn draw(&self, rng: &mut impl Rng) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            rng.random_range(self.min..=self.max)
        }
    }

    /// `min, min + step, …` up to `max`. A range spanning a full turn drops
    /// its upper end, which would repeat the lower one.
    fn lattice(&self, step: f64) -> Vec<f64> {
        let full_turn = self.max - self.min >= 360.0;
        let mut values = Vec::new();
        let mut k = 0u32;
        loop {
            let v = self.min + step * f64::from(k);
            if v > self.max + 1e-9 * step || (full_turn && v >= self.min + 360.0 - 1e-9 * step) {
                break;
            }
            values.push(v.min(self.max));
            k += 1;
        }
        values
    }
}

/// `center ± spread`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub center: f64,
    pub spread: f64,
}

impl Spread {
    pub const fn new(center: f64, spread: f64) -> Self {
        Self { center, spread }
    }

    pub fn interval(&self) -> Interval {
        Interval::new(self.center - self.spread, self.center + self.spread)
    }
}

/// C-arm and table parameter ranges. Rotations are in degrees, lengths in mm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaptureRanges {
    pub r_x: Interval,
    pub r_y: Interval,
    pub r_z: Interval,
    pub t_x: Spread,
    pub t_y: Spread,
    pub t_z: Spread,
    pub sid_mm: Interval,
    pub fov_diagonal_mm: Interval,
    pub rotation_step_deg: f64,
    pub image_size_px: [u32; 2],
}

impl Default for CaptureRanges {
    fn default() -> Self {
        Self {
            r_x: Interval::new(-45.0, 45.0),
            r_y: Interval::new(-45.0, 45.0),
            r_z: Interval::new(-45.0, 45.0),
            t_x: Spread::new(0.0, 40.0),
            t_y: Spread::new(0.0, 40.0),
            t_z: Spread::new(700.0, 40.0),
            sid_mm: Interval::new(950.0, 1230.0),
            fov_diagonal_mm: Interval::new(156.0, 484.0),
            rotation_step_deg: 10.0,
            image_size_px: [960, 742],
        }
    }
}

impl CaptureRanges {
    pub fn validate(&self) -> Result<(), SimError> {
        self.r_x.validate("r_x")?;
        self.r_y.validate("r_y")?;
        self.r_z.validate("r_z")?;
        for (name, s) in [("t_x", self.t_x), ("t_y", self.t_y), ("t_z", self.t_z)] {
            if !(s.spread >= 0.0 && s.center.is_finite() && s.spread.is_finite()) {
                return Err(SimError::InvalidRanges(format!("{name}: {} ± {}", s.center, s.spread)));
            }
        }
        self.sid_mm.validate("sid_mm")?;
        self.fov_diagonal_mm.validate("fov_diagonal_mm")?;
        if !(self.sid_mm.min > 0.0 && self.fov_diagonal_mm.min > 0.0) {
            return Err(SimError::InvalidRanges("SID and FOV must be positive".into()));
        }
        if !(self.rotation_step_deg > 0.0 && self.rotation_step_deg.is_finite()) {
            return Err(SimError::InvalidRanges(format!(
                "rotation step {}",
                self.rotation_step_deg
            )));
        }
        if self.image_size_px.contains(&0) {
            return Err(SimError::InvalidRanges("empty image".into()));
        }
        Ok(())
    }

    /// Ranges after applying `mode`.
    pub fn constrained(&self, mode: ConstraintMode) -> Self {
        match mode {
            ConstraintMode::Full => self.clone(),
            ConstraintMode::Clinical => {
                let clamp = |r: Interval| {
                    Interval::new(r.min.max(-CLINICAL_TILT_DEG), r.max.min(CLINICAL_TILT_DEG))
                };
                Self {
                    r_x: clamp(self.r_x),
                    r_y: clamp(self.r_y),
                    r_z: Interval::new(-180.0, 180.0),
                    ..self.clone()
                }
            }
        }
    }

    /// Acquisition geometry for a SID and FOV diagonal. The pixel grid spans
    /// the FOV diagonal with square pixels, and the principal point sits at
    /// the image centre.
    pub fn geometry(&self, sid_mm: f64, fov_diagonal_mm: f64) -> Result<AcquisitionGeometry, SimError> {
        let [w, h] = self.image_size_px.map(f64::from);
        let k = w.hypot(h) / fov_diagonal_mm;
        Ok(AcquisitionGeometry::new(
            sid_mm,
            k,
            k,
            [w / (2.0 * k), h / (2.0 * k)],
            self.image_size_px,
        )?)
    }
}

pub(crate) const CLINICAL_TILT_DEG: f64 = 45.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    #[default]
    Full,
    /// Viewing from above only: `|r_x|, |r_y| ≤ 45°`, `r_z` over the full turn.
    Clinical,
}

/// One drawn acquisition: object pose in the X-ray source frame plus the
/// imaging geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Capture {
    pub index: u64,
    pub rotation_deg: [f64; 3],
    pub translation_mm: [f64; 3],
    pub sid_mm: f64,
    pub fov_diagonal_mm: f64,
    pub pose: RigidTransform,
    pub geometry: AcquisitionGeometry,
}

/// Seeded capture source. Rotations walk the step lattice, one shuffled
/// pass after another; SID, FOV and translations are uniform draws.
#[derive(Debug, Clone)]
pub struct CaptureSampler {
    ranges: CaptureRanges,
    mode: ConstraintMode,
    seed: u64,
    lattice: Vec<[f64; 3]>,
}

impl CaptureSampler {
    pub fn new(ranges: &CaptureRanges, seed: u64, mode: ConstraintMode) -> Result<Self, SimError> {
        ranges.validate()?;
        let ranges = ranges.constrained(mode);
        if ranges.r_x.min > ranges.r_x.max || ranges.r_y.min > ranges.r_y.max {
            return Err(SimError::EmptyLattice);
        }
        let step = ranges.rotation_step_deg;
        let (xs, ys, zs) = (
            ranges.r_x.lattice(step),
            ranges.r_y.lattice(step),
            ranges.r_z.lattice(step),
        );
        let mut lattice = Vec::with_capacity(xs.len() * ys.len() * zs.len());
        for &x in &xs {
            for &y in &ys {
                for &z in &zs {
                    lattice.push([x, y, z]);
                }
            }
        }
        if lattice.is_empty() {
            return Err(SimError::EmptyLattice);
        }
        Ok(Self { ranges, mode, seed, lattice })
    }

    /// Effective ranges, after the constraint mode.
    pub fn ranges(&self) -> &CaptureRanges {
        &self.ranges
    }

    pub fn mode(&self) -> ConstraintMode {
        self.mode
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn lattice(&self) -> &[[f64; 3]] {
        &self.lattice
    }

    /// Lattice rotation used by sample `index`.
    pub fn rotation_for(&self, index: u64) -> [f64; 3] {
        let n = self.lattice.len() as u64;
        let (pass, pos) = (index / n, index % n);
        let mut order: Vec<u32> = (0..n as u32).collect();
        order.shuffle(&mut stream_rng(self.seed, Purpose::LatticeOrder, pass));
        self.lattice[order[pos as usize] as usize]
    }

    /// Random generator for the continuous draws of sample `index`.
    pub fn rng_for(&self, index: u64) -> rand_chacha::ChaCha8Rng {
        stream_rng(self.seed, Purpose::Capture, index)
    }

    /// Draws translation, SID and FOV for a fixed rotation.
    pub fn draw(
        &self,
        index: u64,
        rotation_deg: [f64; 3],
        rng: &mut impl Rng,
    ) -> Result<Capture, SimError> {
        let r = &self.ranges;
        let translation_mm = [
            r.t_x.interval().draw(rng),
            r.t_y.interval().draw(rng),
            r.t_z.interval().draw(rng),
        ];
        let sid_mm = r.sid_mm.draw(rng);
        let fov_diagonal_mm = r.fov_diagonal_mm.draw(rng);
        let [rx, ry, rz] = rotation_deg;
        Ok(Capture {
            index,
            rotation_deg,
            translation_mm,
            sid_mm,
            fov_diagonal_mm,
            pose: RigidTransform::from_euler_deg(rx, ry, rz, Vector3::from(translation_mm)),
            geometry: r.geometry(sid_mm, fov_diagonal_mm)?,
        })
    }

    /// First draw for sample `index`.
    pub fn capture(&self, index: u64) -> Result<Capture, SimError> {
        self.draw(index, self.rotation_for(index), &mut self.rng_for(index))
    }
}

/// Endless, deterministic stream of captures.
pub fn sample_geometry(
    ranges: &CaptureRanges,
    seed: u64,
    mode: ConstraintMode,
) -> Result<impl Iterator<Item = Capture>, SimError> {
    let sampler = CaptureSampler::new(ranges, seed, mode)?;
    Ok((0u64..).map(move |i| sampler.capture(i).expect("ranges validated")))
}
