//! Open-set benchmark construction from closed-set COCO panoptic data.

mod build;
mod coco;
pub mod png_codec;
mod presets;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use build::{build_open_set_split, SplitRole};
pub use coco::{
    coco_json, default_png_dir, load_coco_panoptic, parse_coco_json, save_coco_panoptic, CocoIndex,
    DatasetManifest, ImageEntry, PanopticDataset,
};
pub use presets::{expand_split, parse_split_list, preset, preset_specs, SplitList};

use crate::types::CategoryError;

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("png: {0}")]
    Png(String),
    #[error("schema: {0}")]
    Schema(String),
    #[error(transparent)]
    Categories(#[from] CategoryError),
    #[error("image {image_id}: duplicate segment id {segment_id}")]
    DuplicateSegment { image_id: u64, segment_id: u32 },
    #[error("image {image_id}: PNG id {segment_id} missing from segments_info")]
    OrphanSegment { image_id: u64, segment_id: u32 },
    #[error("image {image_id}: unknown category {category_id}")]
    UnknownCategory { image_id: u64, category_id: u32 },
    #[error("split {split}: class {class:?} {reason}")]
    BadSplitClass {
        split: String,
        class: String,
        reason: &'static str,
    },
    #[error("split {0}: unresolved or cyclic base")]
    BadSplitBase(String),
}

impl SplitError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
