//! Synthetic inputs with known ground truth: planted feature streams for
//! discovery and perturbed panoptic predictions for evaluation.

mod features;
mod panoptic;

use thiserror::Error;

pub use features::{
    generate_synthetic_features, read_truth, score_discovery, write_truth, DiscoveryScore,
    SyntheticFeatures, TruthLabel,
};
pub use panoptic::{generate_synthetic_panoptic, synthetic_categories, SyntheticPanoptic};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    Config(String),
    #[error("separation constraints infeasible after {0} retries")]
    Infeasible(usize),
    #[error("truth file: {0}")]
    Truth(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Maximum redraws before a constraint is declared infeasible.
pub const MAX_RETRIES: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_planted_classes: usize,
    pub points_per_class: usize,
    /// Share of all records that are distractors.
    pub distractor_fraction: f64,
    /// Upper bound on any pairwise cosine distance inside a class.
    pub intra_class_cos_dist_max: f64,
    /// Lower bound on any cosine distance between points of different classes.
    pub inter_class_cos_dist_min: f64,
    /// Typical pairwise cosine distance inside a class.
    pub planted_spread: f64,
    pub planted_objectness: (f64, f64),
    pub distractor_objectness: (f64, f64),
    pub feature_dim: usize,
    pub boxes_per_image: usize,
    pub box_size: u32,

    pub n_images: usize,
    pub image_width: u32,
    pub image_height: u32,
    pub max_things_per_image: usize,
    pub crowd_prob: f64,
    pub void_prob: f64,
    pub erode_prob: f64,
    pub flip_prob: f64,
    pub drop_prob: f64,
    pub spurious_prob: f64,
    /// Category names marked unknown in the panoptic category table.
    pub unknown_names: Vec<String>,

    pub rng_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_planted_classes: 8,
            points_per_class: 500,
            distractor_fraction: 0.4,
            intra_class_cos_dist_max: 0.05,
            inter_class_cos_dist_min: 0.3,
            planted_spread: 0.01,
            planted_objectness: (0.92, 1.0),
            distractor_objectness: (0.0, 0.5),
            feature_dim: 1024,
            boxes_per_image: 20,
            box_size: 40,
            n_images: 20,
            image_width: 64,
            image_height: 48,
            max_things_per_image: 5,
            crowd_prob: 0.1,
            void_prob: 0.5,
            erode_prob: 0.3,
            flip_prob: 0.1,
            drop_prob: 0.1,
            spurious_prob: 0.2,
            unknown_names: ["car", "cow", "pizza", "toilet"].map(String::from).to_vec(),
            rng_seed: 0,
        }
    }
}

fn unit_interval(name: &str, v: f64) -> Result<(), SynthError> {
    if !(0.0..=1.0).contains(&v) {
        return Err(SynthError::Config(format!("{name} = {v} outside [0, 1]")));
    }
    Ok(())
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        for (name, v) in [
            ("distractor_fraction", self.distractor_fraction),
            ("crowd_prob", self.crowd_prob),
            ("void_prob", self.void_prob),
            ("erode_prob", self.erode_prob),
            ("flip_prob", self.flip_prob),
            ("drop_prob", self.drop_prob),
            ("spurious_prob", self.spurious_prob),
        ] {
            unit_interval(name, v)?;
        }
        for (name, (lo, hi)) in [
            ("planted_objectness", self.planted_objectness),
            ("distractor_objectness", self.distractor_objectness),
        ] {
            unit_interval(name, lo)?;
            unit_interval(name, hi)?;
            if lo > hi {
                return Err(SynthError::Config(format!("{name} range {lo}..{hi} is empty")));
            }
        }
        let intra = self.intra_class_cos_dist_max;
        if !(intra > 0.0 && intra < 1.0) {
            return Err(SynthError::Config(format!("intra_class_cos_dist_max = {intra} outside (0, 1)")));
        }
        if !(self.inter_class_cos_dist_min > intra && self.inter_class_cos_dist_min < 2.0) {
            return Err(SynthError::Config("inter_class_cos_dist_min must exceed intra_class_cos_dist_max and be < 2".into()));
        }
        if !(self.planted_spread > 0.0 && self.planted_spread < intra) {
            return Err(SynthError::Config("planted_spread must lie in (0, intra_class_cos_dist_max)".into()));
        }
        if self.feature_dim < 2 {
            return Err(SynthError::Config("feature_dim must be at least 2".into()));
        }
        if self.boxes_per_image == 0 || self.box_size == 0 {
            return Err(SynthError::Config("boxes_per_image and box_size must be positive".into()));
        }
        if self.image_width < 8 || self.image_height < 8 {
            return Err(SynthError::Config("images must be at least 8x8".into()));
        }
        Ok(())
    }
}
