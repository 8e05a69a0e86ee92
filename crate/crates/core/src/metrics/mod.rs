//! Open-set panoptic quality evaluation.
//!
//! Predictions are matched to ground truth per image with the usual
//! panoptic rules: a pair matches when both carry the same evaluation class
//! and IoU is strictly above 0.5, ground-truth void pixels are dropped from
//! the union, and unmatched predictions lying mostly on void or same-class
//! crowd regions are ignored instead of counted as false positives. All
//! unknown categories collapse into a single evaluation class.

mod dataset;
mod histogram;
mod matching;
pub mod reference;
mod report;

use thiserror::Error;

pub use dataset::{evaluate_dataset, evaluate_with, EvalPair};
pub use histogram::{intersect_histogram, JointHistogram};
pub use matching::{match_segments, EvalClass, MatchResult, SegmentMatch, SegmentRef};
pub use report::{aggregate, ClassMetrics, Group, GroupMetrics, MetricReport};

/// Which side of a ground-truth / prediction pair an error refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    GroundTruth,
    Prediction,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::GroundTruth => "ground truth",
            Side::Prediction => "prediction",
        })
    }
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("dimension mismatch: ground truth {gt:?}, prediction {pred:?}")]
    DimensionMismatch { gt: (u32, u32), pred: (u32, u32) },
    #[error("{side} pixel buffer holds {actual} values, expected {expected}")]
    BadPixelBuffer {
        side: Side,
        expected: usize,
        actual: usize,
    },
    #[error("{side} segment {segment_id} has unknown category {category_id}")]
    UnknownCategory {
        side: Side,
        segment_id: u32,
        category_id: u32,
    },
    #[error("{side} pixel value {segment_id} has no segment table entry")]
    OrphanSegment { side: Side, segment_id: u32 },
    #[error("duplicate image id {0}")]
    DuplicateImage(u64),
    #[error("failed to load image {image_id}: {message}")]
    Load { image_id: u64, message: String },
    #[error("image {image_id}: {source}")]
    Image {
        image_id: u64,
        #[source]
        source: Box<MetricsError>,
    },
    #[error("worker pool: {0}")]
    Pool(String),
}
