//! Synthetic acquisition: C-arm geometry sampling, frame-chain labelling,
//! calibration-step simulation and stand-in network predictions.
//!
//! Every random draw comes from a ChaCha stream derived from
//! `(seed, purpose, sample index)`, so the output does not depend on thread
//! count or iteration order.

mod calibration;
mod dataset;
mod oracle;
mod ranges;

pub use calibration::{
    sample_link, simulate_dome_link, simulate_fiducial_board, BoardObservation, DomeLayout,
    FiducialBoard,
};
pub use dataset::{
    generate_dataset, parse_dataset, read_dataset, write_dataset, DatasetSample, GeneratedDataset,
    Rig,
};
pub use oracle::{oracle_predict, OracleConfig};
pub use ranges::{
    sample_geometry, Capture, CaptureRanges, CaptureSampler, ConstraintMode, Interval, Spread,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::GeometryError;
use crate::pnp::PnpError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid capture ranges: {0}")]
    InvalidRanges(String),
    #[error("rotation lattice is empty")]
    EmptyLattice,
    #[error("sample {index}: no in-image placement after {attempts} attempts")]
    Infeasible { index: u64, attempts: usize },
    #[error("no fiducial lies inside the camera frame")]
    AllOutOfFrame,
    #[error("need at least 3 dome points, got {0}")]
    TooFewPoints(usize),
    #[error("noise level must be finite and non-negative, got {0}")]
    InvalidNoise(f64),
    #[error("dataset line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Pnp(#[from] PnpError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub(crate) enum Purpose {
    Capture = 1,
    LatticeOrder = 2,
    Oracle = 3,
    Board = 4,
    Dome = 5,
    Link = 6,
}

/// Independent generator for one (purpose, index) pair under `seed`.
pub(crate) fn stream_rng(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 56) | (index & ((1 << 56) - 1)));
    rng
}

pub(crate) fn check_noise(sigma: f64) -> Result<(), SimError> {
    if sigma.is_finite() && sigma >= 0.0 {
        Ok(())
    } else {
        Err(SimError::InvalidNoise(sigma))
    }
}
