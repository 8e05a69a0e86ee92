//! JSON fusion input: per image a run-length semantic grid plus instance masks.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{decode_labels, decode_mask, fuse_panoptic, FusionConfig, FusionError, InstancePrediction, LabelRle, Rle, SemanticMap};
use crate::split::{DatasetManifest, ImageEntry, PanopticDataset};
use crate::types::CategoryTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionInput {
    pub images: Vec<FusionImage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionImage {
    pub image_id: u64,
    #[serde(default)]
    pub file_name: Option<String>,
    pub width: u32,
    pub height: u32,
    pub semantic: LabelRle,
    #[serde(default)]
    pub instances: Vec<InstanceEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceEntry {
    pub category_id: u32,
    pub confidence: f64,
    /// Produced by the unknown head.
    #[serde(default)]
    pub unknown: bool,
    pub segmentation: Rle,
}

pub fn parse_fusion_input(text: &str) -> Result<FusionInput, FusionError> {
    Ok(serde_json::from_str(text)?)
}

fn dims_match(what: &str, size: [u32; 2], w: u32, h: u32) -> Result<(), FusionError> {
    if size != [h, w] {
        return Err(FusionError::DimensionMismatch {
            what: what.to_string(),
            got_w: size[1],
            got_h: size[0],
            want_w: w,
            want_h: h,
        });
    }
    Ok(())
}

impl FusionImage {
    pub fn decode(&self) -> Result<(Vec<InstancePrediction>, Vec<InstancePrediction>, SemanticMap), FusionError> {
        dims_match("semantic grid", self.semantic.size, self.width, self.height)?;
        let semantic = SemanticMap {
            width: self.width,
            height: self.height,
            labels: decode_labels(&self.semantic)?,
        };
        let (mut known, mut unknown) = (Vec::new(), Vec::new());
        for (i, e) in self.instances.iter().enumerate() {
            dims_match(&format!("instance mask {i}"), e.segmentation.size, self.width, self.height)?;
            let inst = InstancePrediction {
                mask: decode_mask(&e.segmentation)?,
                category_id: e.category_id,
                confidence: e.confidence,
            };
            if e.unknown { unknown.push(inst) } else { known.push(inst) }
        }
        Ok((known, unknown, semantic))
    }
}

/// Fuses every image of a document into a dataset ready for saving.
pub fn fuse_document(
    input: &FusionInput,
    cats: &CategoryTable,
    cfg: &FusionConfig,
    split_name: &str,
) -> Result<PanopticDataset, FusionError> {
    let mut seen = BTreeSet::new();
    let mut images = Vec::with_capacity(input.images.len());
    let mut maps = Vec::with_capacity(input.images.len());
    for img in &input.images {
        let wrap = |source| FusionError::Image { image_id: img.image_id, source: Box::new(source) };
        if !seen.insert(img.image_id) {
            return Err(wrap(FusionError::Rle("duplicate image id".into())));
        }
        let (known, unknown, semantic) = img.decode().map_err(wrap)?;
        maps.push(fuse_panoptic(&known, &unknown, &semantic, cats, cfg).map_err(wrap)?);
        images.push(ImageEntry {
            image_id: img.image_id,
            width: img.width,
            height: img.height,
            file_name: img.file_name.clone().unwrap_or_else(|| format!("{:012}.jpg", img.image_id)),
            annotation_file: format!("{:012}.png", img.image_id),
        });
    }
    Ok(PanopticDataset {
        manifest: DatasetManifest {
            images,
            categories: cats.clone(),
            split_name: split_name.to_string(),
        },
        maps,
    })
}
