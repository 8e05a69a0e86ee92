use serde::{Deserialize, Serialize};

use super::EngineError;

/// Discovery hyperparameters. Defaults are the published settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub k_clusters: usize,
    pub cluster_interval_steps: u64,
    pub top_cluster_fraction: f64,
    pub objectness_start: f64,
    pub objectness_end: f64,
    /// Threshold increase per found class.
    pub objectness_step: f64,
    pub membership_cos_dist: f64,
    pub mining_cos_dist_start: f64,
    pub mining_cos_dist_end: f64,
    /// Mining distance decrease per found class.
    pub mining_cos_dist_step: f64,
    pub max_proposals_per_batch: usize,
    pub min_box_area: u64,
    pub nms_iou: f64,
    pub kmeans_max_iters: usize,
    pub rng_seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            k_clusters: 128,
            cluster_interval_steps: 200,
            top_cluster_fraction: 0.10,
            objectness_start: 0.9,
            objectness_end: 0.99,
            objectness_step: 0.009,
            membership_cos_dist: 0.15,
            mining_cos_dist_start: 0.025,
            mining_cos_dist_end: 0.01,
            mining_cos_dist_step: 0.0015,
            max_proposals_per_batch: 20,
            min_box_area: 32 * 32,
            nms_iou: 1e-7,
            kmeans_max_iters: 100,
            rng_seed: 0,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let fail = |m: &str| Err(EngineError::InvalidConfig(m.to_string()));
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        let dist = |v: f64| (0.0..=2.0).contains(&v);
        if self.k_clusters == 0 {
            return fail("k_clusters must be >= 1");
        }
        if self.cluster_interval_steps == 0 {
            return fail("cluster_interval_steps must be >= 1");
        }
        if !(self.top_cluster_fraction > 0.0 && self.top_cluster_fraction <= 1.0) {
            return fail("top_cluster_fraction must be in (0, 1]");
        }
        if !unit(self.objectness_start) || !unit(self.objectness_end) || !unit(self.nms_iou) {
            return fail("objectness thresholds and nms_iou must be in [0, 1]");
        }
        if self.objectness_end < self.objectness_start || self.objectness_step < 0.0 {
            return fail("objectness ramp must be non-decreasing");
        }
        if ![self.membership_cos_dist, self.mining_cos_dist_start, self.mining_cos_dist_end]
            .into_iter()
            .all(dist)
        {
            return fail("cosine distances must be in [0, 2]");
        }
        if self.mining_cos_dist_end > self.mining_cos_dist_start || self.mining_cos_dist_step < 0.0 {
            return fail("mining distance ramp must be non-increasing");
        }
        if self.kmeans_max_iters == 0 {
            return fail("kmeans_max_iters must be >= 1");
        }
        Ok(())
    }

    /// Objectness a cluster needs once `found` classes exist.
    pub fn objectness_threshold(&self, found: usize) -> f64 {
        (self.objectness_start + self.objectness_step * found as f64).min(self.objectness_end)
    }

    /// Mining distance once `found` classes exist.
    pub fn mining_distance(&self, found: usize) -> f64 {
        (self.mining_cos_dist_start - self.mining_cos_dist_step * found as f64)
            .max(self.mining_cos_dist_end)
    }

    /// Number of clusters ranked by tightness that are considered per round.
    pub fn top_cluster_count(&self) -> usize {
        (self.top_cluster_fraction * self.k_clusters as f64 - 1e-9).ceil() as usize
    }
}
