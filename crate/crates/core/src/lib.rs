//! Geometry, solvers and evaluation for 6-DoF instrument pose estimation in
//! X-ray images whose acquisition geometry changes from frame to frame.
//!
//! The crate is organised the way a single-shot keypoint pipeline runs:
//!
//! * [`geometry`]: the cone-beam pinhole model, rigid transforms and frame
//!   chains.
//! * [`codec`]: the multi-scale grid head: layout, target assignment,
//!   decoding, the distance-based confidence function and the training loss.
//! * [`pnp`]: EPnP with Gauss–Newton refinement, and rigid point-set
//!   registration.
//! * [`metrics`]: ADD, ADD-S, reprojection, translation and angular errors,
//!   and threshold accuracy reports.
//! * [`sim`]: a synthetic C-arm acquisition simulator that emits labelled
//!   datasets and stand-in network predictions.
//! * [`pipeline`]: prediction selection → pose → evaluation, as used by the
//!   command-line harness.
//!
//! A guide with worked examples lives in the `book/` directory of the
//! repository; its code listings are compiled as doc-tests of this crate.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod codec;
mod fmt;
pub mod geometry;
pub mod metrics;
pub mod pipeline;
pub mod pnp;
pub mod sim;

pub use geometry::{
    project_points, AcquisitionGeometry, FrameChain, Pinhole, Pixel, RigidTransform, WorldPoint,
};

#[cfg(test)]
pub(crate) mod test_support;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/pnp.md")]
    mod pnp {}
    #[doc = include_str!("../../../book/src/codec.md")]
    mod codec {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
