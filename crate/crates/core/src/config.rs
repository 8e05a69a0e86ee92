//! Flat `section.key = value` run configuration.
//!
//! ```text
//! # comments and blank lines are ignored
//! engine.k_clusters = 128
//! synth.planted_objectness = 0.92, 1.0
//! ```
//!
//! Keys are fixed; unknown or repeated keys are errors. Command-line flags
//! are applied after the file.

use thiserror::Error;

use crate::engine::EngineConfig;
use crate::fusion::FusionConfig;
use crate::synth::SynthConfig;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key {key:?} repeated")]
    Repeated { line: usize, key: String },
    #[error("line {line}: {key}: {message}")]
    Value { line: usize, key: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscoverConfig {
    /// Consecutive images grouped into one step.
    pub images_per_step: usize,
}

impl Default for DiscoverConfig {
    fn default() -> Self {
        Self { images_per_step: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub engine: EngineConfig,
    pub synth: SynthConfig,
    pub fusion: FusionConfig,
    pub discover: DiscoverConfig,
}

trait ConfigValue: Sized {
    fn parse(s: &str) -> Result<Self, String>;
    fn render(&self) -> String;
}

macro_rules! from_str_value {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn parse(s: &str) -> Result<Self, String> {
                s.parse().map_err(|e| format!("{e}"))
            }
            fn render(&self) -> String {
                self.to_string()
            }
        }
    )*};
}
from_str_value!(usize, u64, u32, bool);

impl ConfigValue for f64 {
    fn parse(s: &str) -> Result<Self, String> {
        let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
        if v.is_finite() { Ok(v) } else { Err("must be finite".into()) }
    }
    fn render(&self) -> String {
        format!("{self:?}")
    }
}

impl ConfigValue for (f64, f64) {
    fn parse(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once(',').ok_or("expected `low, high`")?;
        Ok((f64::parse(a.trim())?, f64::parse(b.trim())?))
    }
    fn render(&self) -> String {
        format!("{:?}, {:?}", self.0, self.1)
    }
}

impl ConfigValue for Vec<String> {
    fn parse(s: &str) -> Result<Self, String> {
        Ok(s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(String::from).collect())
    }
    fn render(&self) -> String {
        self.join(", ")
    }
}

macro_rules! keys {
    ($($key:literal => $($path:ident).+ : $t:ty),* $(,)?) => {
        pub const KEYS: &[&str] = &[$($key),*];

        fn set(cfg: &mut RunConfig, key: &str, value: &str) -> Option<Result<(), String>> {
            match key {
                $($key => Some(<$t as ConfigValue>::parse(value).map(|v| cfg.$($path).+ = v)),)*
                _ => None,
            }
        }

        fn entries(cfg: &RunConfig) -> Vec<(&'static str, String)> {
            vec![$(($key, ConfigValue::render(&cfg.$($path).+))),*]
        }
    };
}

keys! {
    "engine.k_clusters" => engine.k_clusters: usize,
    "engine.cluster_interval_steps" => engine.cluster_interval_steps: u64,
    "engine.top_cluster_fraction" => engine.top_cluster_fraction: f64,
    "engine.objectness_start" => engine.objectness_start: f64,
    "engine.objectness_end" => engine.objectness_end: f64,
    "engine.objectness_step" => engine.objectness_step: f64,
    "engine.membership_cos_dist" => engine.membership_cos_dist: f64,
    "engine.mining_cos_dist_start" => engine.mining_cos_dist_start: f64,
    "engine.mining_cos_dist_end" => engine.mining_cos_dist_end: f64,
    "engine.mining_cos_dist_step" => engine.mining_cos_dist_step: f64,
    "engine.max_proposals_per_batch" => engine.max_proposals_per_batch: usize,
    "engine.min_box_area" => engine.min_box_area: u64,
    "engine.nms_iou" => engine.nms_iou: f64,
    "engine.kmeans_max_iters" => engine.kmeans_max_iters: usize,
    "engine.rng_seed" => engine.rng_seed: u64,
    "discover.images_per_step" => discover.images_per_step: usize,
    "fusion.overlap_keep_fraction" => fusion.overlap_keep_fraction: f64,
    "fusion.stuff_area_min" => fusion.stuff_area_min: u64,
    "fusion.unknown_overwrite_stuff" => fusion.unknown_overwrite_stuff: bool,
    "synth.n_planted_classes" => synth.n_planted_classes: usize,
    "synth.points_per_class" => synth.points_per_class: usize,
    "synth.distractor_fraction" => synth.distractor_fraction: f64,
    "synth.intra_class_cos_dist_max" => synth.intra_class_cos_dist_max: f64,
    "synth.inter_class_cos_dist_min" => synth.inter_class_cos_dist_min: f64,
    "synth.planted_spread" => synth.planted_spread: f64,
    "synth.planted_objectness" => synth.planted_objectness: (f64, f64),
    "synth.distractor_objectness" => synth.distractor_objectness: (f64, f64),
    "synth.feature_dim" => synth.feature_dim: usize,
    "synth.boxes_per_image" => synth.boxes_per_image: usize,
    "synth.box_size" => synth.box_size: u32,
    "synth.n_images" => synth.n_images: usize,
    "synth.image_width" => synth.image_width: u32,
    "synth.image_height" => synth.image_height: u32,
    "synth.max_things_per_image" => synth.max_things_per_image: usize,
    "synth.crowd_prob" => synth.crowd_prob: f64,
    "synth.void_prob" => synth.void_prob: f64,
    "synth.erode_prob" => synth.erode_prob: f64,
    "synth.flip_prob" => synth.flip_prob: f64,
    "synth.drop_prob" => synth.drop_prob: f64,
    "synth.spurious_prob" => synth.spurious_prob: f64,
    "synth.unknown_names" => synth.unknown_names: Vec<String>,
    "synth.rng_seed" => synth.rng_seed: u64,
}

impl RunConfig {
    /// Defaults overridden by every assignment in `text`.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.apply(text)?;
        Ok(cfg)
    }

    pub fn apply(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                message: "expected `key = value`".into(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::Repeated { line, key: key.into() });
            }
            match set(self, key, value) {
                None => return Err(ConfigError::UnknownKey { line, key: key.into() }),
                Some(Err(message)) => return Err(ConfigError::Value { line, key: key.into(), message }),
                Some(Ok(())) => {}
            }
        }
        Ok(())
    }

    /// Every key with its current value, in a form [`RunConfig::parse`] reads back.
    pub fn to_text(&self) -> String {
        entries(self).into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
