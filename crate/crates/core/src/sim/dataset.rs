use std::io::{BufRead, Write};

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::Deserialize;

use super::{CaptureSampler, SimError};
use crate::codec::KEYPOINTS;
use crate::fmt::float17;
use crate::geometry::{project_points, AcquisitionGeometry, FrameChain, Pixel, RigidTransform};
use crate::metrics::InstrumentModel;

const MAX_ATTEMPTS: usize = 100;

/// Fixed parts of the acquisition rig: where the instrument sits on the
/// fiducial board, and how the optical camera is mounted relative to the
/// X-ray source.
#[derive(Debug, Clone, PartialEq)]
pub struct Rig {
    pub object_to_board: RigidTransform,
    pub camera_to_source: RigidTransform,
    pub optical_camera: AcquisitionGeometry,
}

impl Default for Rig {
    fn default() -> Self {
        Self {
            object_to_board: RigidTransform::from_translation(Vector3::new(0.0, 0.0, 20.0)),
            // on the detector housing, looking back towards the source
            camera_to_source: RigidTransform {
                rotation: Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0)),
                translation: Vector3::new(40.0, 0.0, 1000.0),
            },
            optical_camera: AcquisitionGeometry {
                focal_length_mm: 4.0,
                pixel_density_u: 500.0,
                pixel_density_v: 500.0,
                principal_offset_mm: [1.92, 1.08],
                image_size_px: [1920, 1080],
            },
        }
    }
}

impl Rig {
    pub const OBJECT: &'static str = "object";
    pub const BOARD: &'static str = "board";
    pub const CAMERA: &'static str = "optical_camera";
    pub const SOURCE: &'static str = "xray_source";

    /// The board pose the optical camera would observe when the object has
    /// `object_to_source` in the X-ray source frame.
    pub fn board_to_camera(&self, object_to_source: &RigidTransform) -> RigidTransform {
        self.camera_to_source
            .inverse()
            .compose(object_to_source)
            .compose(&self.object_to_board.inverse())
    }

    pub fn chain(&self, board_to_camera: &RigidTransform) -> FrameChain {
        FrameChain::new()
            .with_link(Self::OBJECT, Self::BOARD, self.object_to_board)
            .with_link(Self::BOARD, Self::CAMERA, *board_to_camera)
            .with_link(Self::CAMERA, Self::SOURCE, self.camera_to_source)
    }

    /// Object pose in the source frame, resolved through the chain.
    pub fn label(&self, board_to_camera: &RigidTransform) -> Result<RigidTransform, SimError> {
        Ok(self.chain(board_to_camera).resolve(Self::OBJECT, Self::SOURCE)?)
    }
}

/// One labelled acquisition.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSample {
    pub id: u64,
    pub geometry: AcquisitionGeometry,
    /// Object to X-ray source.
    pub pose: RigidTransform,
    /// Projected control points, centre first.
    pub points_2d: [Pixel; KEYPOINTS],
    pub instrument: String,
}

impl DatasetSample {
    /// Projects `model`'s control points with the stored pose and geometry.
    pub fn reproject(&self, model: &InstrumentModel) -> Result<[Pixel; KEYPOINTS], SimError> {
        let px = project_points(&model.control_points, &self.pose, &self.geometry)?;
        Ok(std::array::from_fn(|k| px[k]))
    }

    pub fn to_json_line(&self) -> String {
        let g = &self.geometry;
        let nums = |xs: &mut dyn Iterator<Item = f64>| {
            xs.map(float17).collect::<Vec<_>>().join(",")
        };
        let r = self.pose.to_row_major();
        format!(
            concat!(
                "{{\"id\":{},\"f\":{},\"k_u\":{},\"k_v\":{},\"x_0\":{},\"y_0\":{},",
                "\"W_img\":{},\"H_img\":{},\"R\":[{}],\"C\":[{}],\"points_2d\":[{}],\"instrument\":{}}}"
            ),
            self.id,
            float17(g.focal_length_mm),
            float17(g.pixel_density_u),
            float17(g.pixel_density_v),
            float17(g.principal_offset_mm[0]),
            float17(g.principal_offset_mm[1]),
            g.image_size_px[0],
            g.image_size_px[1],
            nums(&mut r.0.iter().copied()),
            nums(&mut r.1.iter().copied()),
            nums(&mut self.points_2d.iter().flat_map(|p| [p.x, p.y])),
            serde_json::to_string(&self.instrument).expect("string serializes"),
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GeneratedDataset {
    pub samples: Vec<DatasetSample>,
    /// Placements drawn in total, including rejected ones.
    pub attempts: u64,
}

impl GeneratedDataset {
    pub fn rejection_rate(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            1.0 - self.samples.len() as f64 / self.attempts as f64
        }
    }
}

/// Draws `n` samples whose nine control points all project inside the
/// image. Placements that leave the image are redrawn (same lattice
/// rotation); a sample that fails 100 times in a row makes the
/// configuration infeasible.
pub fn generate_dataset(
    instrument: &InstrumentModel,
    sampler: &CaptureSampler,
    rig: &Rig,
    n: usize,
) -> Result<GeneratedDataset, SimError> {
    let results: Vec<Result<(DatasetSample, usize), SimError>> = (0..n as u64)
        .into_par_iter()
        .map(|index| generate_one(instrument, sampler, rig, index))
        .collect();
    let mut out = GeneratedDataset { samples: Vec::with_capacity(n), attempts: 0 };
    for r in results {
        let (sample, attempts) = r?;
        out.samples.push(sample);
        out.attempts += attempts as u64;
    }
    Ok(out)
}

fn generate_one(
    instrument: &InstrumentModel,
    sampler: &CaptureSampler,
    rig: &Rig,
    index: u64,
) -> Result<(DatasetSample, usize), SimError> {
    let rotation = sampler.rotation_for(index);
    let mut rng = sampler.rng_for(index);
    for attempt in 1..=MAX_ATTEMPTS {
        let capture = sampler.draw(index, rotation, &mut rng)?;
        let pose = rig.label(&rig.board_to_camera(&capture.pose))?;
        let Ok(px) = project_points(&instrument.control_points, &pose, &capture.geometry) else {
            continue;
        };
        if px.iter().all(|p| capture.geometry.contains(p)) {
            let sample = DatasetSample {
                id: index,
                geometry: capture.geometry,
                pose,
                points_2d: std::array::from_fn(|k| px[k]),
                instrument: instrument.name.clone(),
            };
            return Ok((sample, attempt));
        }
    }
    Err(SimError::Infeasible { index, attempts: MAX_ATTEMPTS })
}

pub fn write_dataset<W: Write>(mut out: W, samples: &[DatasetSample]) -> Result<(), SimError> {
    for s in samples {
        writeln!(out, "{}", s.to_json_line())?;
    }
    Ok(())
}

#[allow(non_snake_case)]
#[derive(Deserialize)]
struct SampleRecord {
    id: u64,
    f: f64,
    k_u: f64,
    k_v: f64,
    x_0: f64,
    y_0: f64,
    W_img: u32,
    H_img: u32,
    R: [f64; 9],
    C: [f64; 3],
    points_2d: [f64; 2 * KEYPOINTS],
    instrument: String,
}

fn sample_from_line(line: &str) -> Result<DatasetSample, String> {
    let r: SampleRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let geometry = AcquisitionGeometry::new(r.f, r.k_u, r.k_v, [r.x_0, r.y_0], [r.W_img, r.H_img])
        .map_err(|e| e.to_string())?;
    let pose = RigidTransform::from_row_major(&r.R, &r.C).map_err(|e| e.to_string())?;
    Ok(DatasetSample {
        id: r.id,
        geometry,
        pose,
        points_2d: std::array::from_fn(|k| Pixel::new(r.points_2d[2 * k], r.points_2d[2 * k + 1])),
        instrument: r.instrument,
    })
}

pub fn read_dataset<R: BufRead>(input: R) -> Result<Vec<DatasetSample>, SimError> {
    let mut samples = Vec::new();
    for (k, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        samples.push(
            sample_from_line(&line).map_err(|message| SimError::Malformed { line: k + 1, message })?,
        );
    }
    Ok(samples)
}

pub fn parse_dataset(text: &str) -> Result<Vec<DatasetSample>, SimError> {
    read_dataset(text.as_bytes())
}
