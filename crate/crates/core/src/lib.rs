//! Open-set panoptic segmentation tooling.
//!
//! - [`types`]: categories, panoptic maps, boxes.
//! - [`metrics`]: PQ/SQ/RQ with a collapsed unknown class.
//! - [`split`]: COCO panoptic I/O and open-set split construction.
//! - [`engine`]: exemplar-based discovery of unknown classes from proposal features.
//! - [`losses`]: open-set classification losses with analytic gradients.
//! - [`fusion`]: instance + semantic fusion with unknown overlay.
//! - [`synth`]: synthetic features and panoptic maps with known ground truth.

pub mod metrics;
pub mod split;
pub mod types;
pub mod engine;
pub mod losses;
pub mod fusion;
pub mod synth;
pub mod config;
pub mod manifest;
pub mod cli;
