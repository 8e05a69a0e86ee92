use std::collections::HashMap;

use super::ProposalRecord;
use crate::types::BoundingBox;

/// Source of fresh features for stored exemplars. Stands in for the live
/// backbone, whose features drift as training proceeds.
pub trait FeatureProvider {
    fn feature(&self, image_id: u64, bbox: &BoundingBox) -> Result<Vec<f32>, String>;
}

impl<F> FeatureProvider for F
where
    F: Fn(u64, &BoundingBox) -> Result<Vec<f32>, String>,
{
    fn feature(&self, image_id: u64, bbox: &BoundingBox) -> Result<Vec<f32>, String> {
        self(image_id, bbox)
    }
}

/// Features looked up from a fixed set of records, e.g. a proposal file.
#[derive(Debug, Default, Clone)]
pub struct StaticFeatures {
    by_ref: HashMap<(u64, BoundingBox), Vec<f32>>,
}

impl StaticFeatures {
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a ProposalRecord>) -> Self {
        Self {
            by_ref: records
                .into_iter()
                .map(|r| ((r.image_id, r.bbox), r.feature.clone()))
                .collect(),
        }
    }
}

impl FeatureProvider for StaticFeatures {
    fn feature(&self, image_id: u64, bbox: &BoundingBox) -> Result<Vec<f32>, String> {
        self.by_ref
            .get(&(image_id, *bbox))
            .cloned()
            .ok_or_else(|| "no such proposal".to_string())
    }
}
