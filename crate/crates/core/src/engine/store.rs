use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{normalize, EngineConfig, EngineError, FeatureProvider};
use crate::types::BoundingBox;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExemplarSource {
    Cluster,
    Mined,
}

impl ExemplarSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Cluster => "cluster",
            Self::Mined => "mined",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exemplar {
    pub image_id: u64,
    pub bbox: BoundingBox,
    pub objectness: f32,
    /// Unit norm.
    pub feature: Vec<f64>,
    pub source: ExemplarSource,
    /// Step at which the exemplar was stored.
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnknownClass {
    pub id: u32,
    /// Step of the clustering round that founded the class.
    pub founded_at: u64,
    pub exemplars: Vec<Exemplar>,
}

/// Discovered unknown classes and the current adaptive thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct ExemplarStore {
    pub classes: BTreeMap<u32, UnknownClass>,
    pub current_objectness_threshold: f64,
    pub current_mining_distance: f64,
    pub found_class_count: usize,
    pub feature_dim: usize,
    next_class_id: u32,
}

impl ExemplarStore {
    pub fn new(cfg: &EngineConfig, feature_dim: usize) -> Self {
        Self {
            classes: BTreeMap::new(),
            current_objectness_threshold: cfg.objectness_threshold(0),
            current_mining_distance: cfg.mining_distance(0),
            found_class_count: 0,
            feature_dim,
            next_class_id: 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn exemplar_count(&self) -> usize {
        self.classes.values().map(|c| c.exemplars.len()).sum()
    }

    /// Opens a fresh class; ids are never reused.
    pub(crate) fn create_class(&mut self, founded_at: u64, exemplars: Vec<Exemplar>) -> u32 {
        let id = self.next_class_id;
        self.next_class_id += 1;
        self.classes.insert(
            id,
            UnknownClass {
                id,
                founded_at,
                exemplars,
            },
        );
        id
    }

    /// Recomputes thresholds from the found-class count.
    pub(crate) fn advance_thresholds(&mut self, cfg: &EngineConfig) {
        self.current_objectness_threshold = self
            .current_objectness_threshold
            .max(cfg.objectness_threshold(self.found_class_count));
        self.current_mining_distance = self
            .current_mining_distance
            .min(cfg.mining_distance(self.found_class_count));
    }

    /// Replaces every exemplar feature with a fresh, re-normalized one from
    /// `provider`. On error the store is left unchanged.
    pub fn refresh_features(&mut self, provider: &dyn FeatureProvider) -> Result<(), EngineError> {
        let mut fresh = Vec::with_capacity(self.exemplar_count());
        for e in self.classes.values().flat_map(|c| &c.exemplars) {
            let fail = |message: String| EngineError::Provider {
                image_id: e.image_id,
                bbox: e.bbox,
                message,
            };
            let f = provider.feature(e.image_id, &e.bbox).map_err(&fail)?;
            if f.len() != self.feature_dim {
                return Err(fail(format!(
                    "returned {} values, expected {}",
                    f.len(),
                    self.feature_dim
                )));
            }
            fresh.push(normalize(&f).ok_or_else(|| fail("zero-norm feature".into()))?);
        }
        let mut fresh = fresh.into_iter();
        for e in self.classes.values_mut().flat_map(|c| &mut c.exemplars) {
            e.feature = fresh.next().expect("one feature per exemplar");
        }
        Ok(())
    }
}

/// Free-function form of [`ExemplarStore::refresh_features`].
pub fn refresh_features(
    store: &mut ExemplarStore,
    provider: &dyn FeatureProvider,
) -> Result<(), EngineError> {
    store.refresh_features(provider)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(features: &[[f32; 2]]) -> ExemplarStore {
        let mut s = ExemplarStore::new(&EngineConfig::default(), 2);
        let ex = features
            .iter()
            .enumerate()
            .map(|(i, f)| Exemplar {
                image_id: i as u64,
                bbox: BoundingBox::new(0, 0, 40, 40).unwrap(),
                objectness: 0.9,
                feature: normalize(f).unwrap(),
                source: ExemplarSource::Cluster,
                step: 0,
            })
            .collect();
        s.create_class(0, ex);
        s
    }

    #[test]
    fn identity_and_scaled_refresh_keep_store() {
        let feats = [[1.0f32, 2.0], [3.0, -1.0]];
        let mut s = store_with(&feats);
        let before = s.clone();
        let identity = |id: u64, _: &BoundingBox| Ok(feats[id as usize].to_vec());
        s.refresh_features(&identity).unwrap();
        assert_eq!(s, before);
        let scaled = |id: u64, _: &BoundingBox| Ok(feats[id as usize].iter().map(|x| x * 5.0).collect());
        s.refresh_features(&scaled).unwrap();
        for (a, b) in s.classes[&1].exemplars.iter().zip(&before.classes[&1].exemplars) {
            for (x, y) in a.feature.iter().zip(&b.feature) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn provider_failure_names_reference_and_keeps_store() {
        let mut s = store_with(&[[1.0, 0.0], [0.0, 1.0]]);
        let before = s.clone();
        let failing = |id: u64, _: &BoundingBox| if id == 1 { Err("gone".to_string()) } else { Ok(vec![1.0, 1.0]) };
        let err = s.refresh_features(&failing).unwrap_err();
        assert!(matches!(err, EngineError::Provider { image_id: 1, .. }));
        assert_eq!(s, before);
    }

    #[test]
    fn class_ids_are_fresh() {
        let mut s = store_with(&[[1.0, 0.0]]);
        let a = s.create_class(5, vec![]);
        let b = s.create_class(5, vec![]);
        assert_eq!((a, b), (2, 3));
    }
}
