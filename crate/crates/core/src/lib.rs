//! Post-detector 3D object property estimation for monocular images.
//!
//! Given 2D detections and an opaque per-object feature vector, a small
//! three-branch head predicts each object's local orientation (MultiBin:
//! bin scores plus sin/cos residuals) and its dimensions as a deviation from
//! the class mean. Global yaw follows from the local angle plus the camera ray
//! through the box.
//!
//! - [`kitti`]: label, result and calibration files; per-class mean dims.
//! - [`geometry`]: pinhole projection, box corners, ray angles, crop padding.
//! - [`multibin`]: bin layout, target encoding and decoding.
//! - [`losses`]: score, residual, orientation and dimension losses with gradients.
//! - [`net`]: the estimation head, AdamW, plateau scheduling, training, weight files.
//! - [`synth`]: self-consistent synthetic scenes and datasets.
//! - [`eval`]: KITTI-style AP/AOS evaluation and inference timing.
//! - [`cli`]: the `monolite` command line.

pub mod cli;
pub mod eval;
pub mod fsutil;
pub mod geometry;
pub mod gradcheck;
pub mod kitti;
pub mod losses;
pub mod multibin;
pub mod net;
pub mod synth;

pub use geometry::wrap_angle;
pub use kitti::{BBox2D, CameraIntrinsics, Dims, ObjectLabel};
pub use multibin::{BinLayout, BinPrediction, BinTargets};
