//! Exemplar-based discovery of unknown classes.
//!
//! Proposals from void regions are deduplicated, sampled by objectness and
//! buffered. Every `cluster_interval_steps` steps the buffer is
//! over-clustered with spherical k-means; tight, high-objectness clusters
//! found new unknown classes whose members become exemplars. In between,
//! incoming proposals close enough to an existing exemplar are mined into
//! that class.

mod config;
mod discovery;
mod kmeans;
mod mine;
mod nms;
pub mod proposal_file;
mod provider;
mod sampling;
mod select;
mod store;

use thiserror::Error;

pub use config::EngineConfig;
pub use discovery::{
    read_pseudo_labels, run_discovery, write_pseudo_labels, DiscoveryEngine, DiscoveryOutput, PseudoLabel, RoundSummary,
};
pub use kmeans::{cluster_reports, normalize, spherical_kmeans, ClusterReport, KMeansResult};
pub use mine::{mine_exemplars, MinedAssignment};
pub use nms::dedup_nms;
pub use proposal_file::{read_proposals, read_proposals_from, write_proposals, ProposalRecord};
pub use provider::{FeatureProvider, StaticFeatures};
pub use sampling::sample_proposals;
pub use select::select_unknown_clusters;
pub use store::{refresh_features, Exemplar, ExemplarSource, ExemplarStore, UnknownClass};

use crate::types::BoundingBox;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("feature dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("point {index} has zero norm")]
    ZeroVector { index: usize },
    #[error("k-means needs at least one point and k >= 1 (points {points}, k {k})")]
    InvalidK { points: usize, k: usize },
    #[error("feature provider failed for image {image_id} box {bbox:?}: {message}")]
    Provider {
        image_id: u64,
        bbox: BoundingBox,
        message: String,
    },
    #[error("proposal file: {0}")]
    Format(String),
    #[error("invalid engine config: {0}")]
    InvalidConfig(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("step {step}: {source}")]
    AtStep {
        step: u64,
        #[source]
        source: Box<EngineError>,
    },
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
