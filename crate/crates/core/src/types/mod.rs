//! Shared data model: categories, panoptic maps, boxes and split definitions.

mod bbox;
mod category;
pub(crate) mod map;
mod split_spec;

pub use bbox::{box_iou, BoundingBox};
pub use category::{Category, CategoryError, CategoryKind, CategoryStatus, CategoryTable};
pub use map::{validate_map, PanopticMap, SegmentInfo, Violation};
pub use split_spec::SplitSpec;

/// Pixel value reserved for void / unlabeled pixels.
pub const VOID_ID: u32 = 0;
