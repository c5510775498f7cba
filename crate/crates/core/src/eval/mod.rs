//! KITTI-style 2D detection AP and orientation AOS, stratified by difficulty,
//! plus head inference timing.

mod bench;
mod matching;
mod metrics;
mod report;

use thiserror::Error;

use crate::kitti::KittiError;

pub use bench::{bench_inference, LatencyStats};
pub use matching::{match_detections, DetKind, DifficultySpec, MatchOutcome};
pub use metrics::{
    average_orientation_similarity, average_precision, curve, interpolate, ApProtocol, CurvePoint,
    Ranked,
};
pub use report::{
    default_iou_threshold, evaluate, evaluate_frames, parse_report_table, DifficultyResult,
    EvalOptions, EvalReport, Frame, GridSample, MatchedPair,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("detection {index} has no score")]
    MissingScore { index: usize },
    #[error("no valid ground truth for this difficulty")]
    NoGroundTruth,
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: std::path::PathBuf,
        #[source]
        source: KittiError,
    },
    #[error("report table: {0}")]
    Table(String),
    #[error("benchmark: {0}")]
    Bench(String),
}
