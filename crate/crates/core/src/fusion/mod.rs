//! Combines instance masks and a semantic stuff grid into one panoptic map.
//!
//! Known instances are painted first in confidence order. An instance whose
//! mask is mostly covered by earlier instances is dropped. Stuff fills the
//! remaining pixels by category and small stuff regions become void. Unknown
//! instances are then painted onto the leftover void pixels under the same
//! survival rule.

mod input;
mod rle;

use std::cmp::Ordering;
use std::collections::BTreeMap;

use thiserror::Error;

use crate::types::{CategoryStatus, CategoryTable, PanopticMap, VOID_ID};

pub use input::{fuse_document, parse_fusion_input, FusionImage, FusionInput, InstanceEntry};
pub use rle::{decode_labels, decode_mask, encode_labels, encode_mask, BinaryMask, LabelRle, Rle};

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("{what} is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    DimensionMismatch {
        what: String,
        got_w: u32,
        got_h: u32,
        want_w: u32,
        want_h: u32,
    },
    #[error("confidence {0} outside [0, 1]")]
    Confidence(f64),
    #[error("invalid rle: {0}")]
    Rle(String),
    #[error("category {id}: {reason}")]
    Category { id: u32, reason: &'static str },
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("image {image_id}: {source}")]
    Image {
        image_id: u64,
        #[source]
        source: Box<FusionError>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionConfig {
    /// An instance is kept when at least this fraction of its mask is still free.
    pub overlap_keep_fraction: f64,
    /// Stuff regions smaller than this many pixels become void.
    pub stuff_area_min: u64,
    /// Unknown instances may also overwrite stuff pixels.
    pub unknown_overwrite_stuff: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            overlap_keep_fraction: 0.5,
            stuff_area_min: 4096,
            unknown_overwrite_stuff: false,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), FusionError> {
        if !(0.0..=1.0).contains(&self.overlap_keep_fraction) {
            return Err(FusionError::Config(format!(
                "overlap_keep_fraction {} outside [0, 1]",
                self.overlap_keep_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstancePrediction {
    pub mask: BinaryMask,
    pub category_id: u32,
    pub confidence: f64,
}

/// Row-major per-pixel category ids from a semantic head.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticMap {
    pub width: u32,
    pub height: u32,
    pub labels: Vec<u32>,
}

struct Ordered<'a> {
    index: usize,
    inst: &'a InstancePrediction,
    area: u64,
    // centroid as (sum_y, sum_x) over area; compared by cross-multiplication
    sum_y: u64,
    sum_x: u64,
}

fn order_instances(list: &[InstancePrediction]) -> Vec<Ordered<'_>> {
    let mut out: Vec<Ordered<'_>> = list
        .iter()
        .enumerate()
        .map(|(index, inst)| {
            let w = inst.mask.width as usize;
            let (mut area, mut sum_y, mut sum_x) = (0u64, 0u64, 0u64);
            for (k, _) in inst.mask.bits.iter().enumerate().filter(|(_, &b)| b) {
                area += 1;
                sum_y += (k / w) as u64;
                sum_x += (k % w) as u64;
            }
            Ordered { index, inst, area, sum_y, sum_x }
        })
        .collect();
    out.sort_by(|a, b| {
        b.inst
            .confidence
            .total_cmp(&a.inst.confidence)
            .then(a.inst.category_id.cmp(&b.inst.category_id))
            .then_with(|| centroid_cmp(a, b))
            .then(a.index.cmp(&b.index))
    });
    out
}

fn centroid_cmp(a: &Ordered<'_>, b: &Ordered<'_>) -> Ordering {
    let (aa, ba) = (a.area.max(1) as u128, b.area.max(1) as u128);
    (a.sum_y as u128 * ba)
        .cmp(&(b.sum_y as u128 * aa))
        .then((a.sum_x as u128 * ba).cmp(&(b.sum_x as u128 * aa)))
}

fn check_instance(
    inst: &InstancePrediction,
    i: usize,
    w: u32,
    h: u32,
    cats: &CategoryTable,
    unknown: bool,
) -> Result<(), FusionError> {
    if inst.mask.width != w || inst.mask.height != h || inst.mask.bits.len() != (w * h) as usize {
        return Err(FusionError::DimensionMismatch {
            what: format!("instance mask {i}"),
            got_w: inst.mask.width,
            got_h: inst.mask.height,
            want_w: w,
            want_h: h,
        });
    }
    if !(0.0..=1.0).contains(&inst.confidence) {
        return Err(FusionError::Confidence(inst.confidence));
    }
    let id = inst.category_id;
    let cat = cats.get(id).ok_or(FusionError::Category { id, reason: "not in the category table" })?;
    match (unknown, cat.status) {
        (false, _) if cat.is_known_thing() => Ok(()),
        (false, _) => Err(FusionError::Category { id, reason: "known instances need a known thing category" }),
        (true, CategoryStatus::Unknown) => Ok(()),
        (true, _) => Err(FusionError::Category { id, reason: "unknown instances need an unknown category" }),
    }
}

/// Fuses one image. Segment ids are assigned from 1 in paint order.
pub fn fuse_panoptic(
    known: &[InstancePrediction],
    unknown: &[InstancePrediction],
    semantic: &SemanticMap,
    cats: &CategoryTable,
    cfg: &FusionConfig,
) -> Result<PanopticMap, FusionError> {
    cfg.validate()?;
    let (w, h) = (semantic.width, semantic.height);
    let n = w as usize * h as usize;
    if semantic.labels.len() != n {
        return Err(FusionError::Rle(format!(
            "semantic grid has {} labels for {w}x{h}",
            semantic.labels.len()
        )));
    }
    for (i, inst) in known.iter().enumerate() {
        check_instance(inst, i, w, h, cats, false)?;
    }
    for (i, inst) in unknown.iter().enumerate() {
        check_instance(inst, i, w, h, cats, true)?;
    }

    let mut pixels = vec![VOID_ID; n];
    let mut labels: BTreeMap<u32, (u32, bool)> = BTreeMap::new();
    let mut next_id = 1u32;

    let keep = |free: u64, area: u64| free > 0 && free as f64 >= cfg.overlap_keep_fraction * area as f64;
    for o in order_instances(known) {
        let free = o
            .inst
            .mask
            .bits
            .iter()
            .zip(&pixels)
            .filter(|(&b, &p)| b && p == VOID_ID)
            .count() as u64;
        if !keep(free, o.area) {
            continue;
        }
        for (p, &b) in pixels.iter_mut().zip(&o.inst.mask.bits) {
            if b && *p == VOID_ID {
                *p = next_id;
            }
        }
        labels.insert(next_id, (o.inst.category_id, false));
        next_id += 1;
    }

    let mut stuff_area: BTreeMap<u32, u64> = BTreeMap::new();
    for (p, &l) in pixels.iter().zip(&semantic.labels) {
        if *p == VOID_ID && cats.get(l).is_some_and(|c| c.is_known_stuff()) {
            *stuff_area.entry(l).or_default() += 1;
        }
    }
    let mut stuff_segment: BTreeMap<u32, u32> = BTreeMap::new();
    for (&cat, &area) in &stuff_area {
        if area >= cfg.stuff_area_min {
            stuff_segment.insert(cat, next_id);
            labels.insert(next_id, (cat, false));
            next_id += 1;
        }
    }
    for (p, l) in pixels.iter_mut().zip(&semantic.labels) {
        if *p == VOID_ID {
            if let Some(&seg) = stuff_segment.get(l) {
                *p = seg;
            }
        }
    }

    let stuff_ids = stuff_segment.values().min().copied().unwrap_or(next_id)..next_id;
    for o in order_instances(unknown) {
        let paintable = |p: u32| p == VOID_ID || (cfg.unknown_overwrite_stuff && stuff_ids.contains(&p));
        let free = o
            .inst
            .mask
            .bits
            .iter()
            .zip(&pixels)
            .filter(|(&b, &p)| b && paintable(p))
            .count() as u64;
        if !keep(free, o.area) {
            continue;
        }
        for (p, &b) in pixels.iter_mut().zip(&o.inst.mask.bits) {
            if b && paintable(*p) {
                *p = next_id;
            }
        }
        labels.insert(next_id, (o.inst.category_id, false));
        next_id += 1;
    }

    Ok(PanopticMap::from_pixels(w, h, pixels, &labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Category, CategoryKind, SegmentInfo};

    fn cats() -> CategoryTable {
        CategoryTable::new(vec![
            Category::void(0),
            Category::new(1, "person", CategoryKind::Thing, CategoryStatus::Known),
            Category::new(2, "dog", CategoryKind::Thing, CategoryStatus::Known),
            Category::new(3, "grass", CategoryKind::Stuff, CategoryStatus::Known),
            Category::new(9, "cow", CategoryKind::Thing, CategoryStatus::Unknown),
        ])
        .unwrap()
    }

    fn rect(w: u32, h: u32, x0: u32, y0: u32, x1: u32, y1: u32) -> BinaryMask {
        let mut m = BinaryMask::new(w, h);
        for y in y0..y1 {
            for x in x0..x1 {
                m.set(x, y);
            }
        }
        m
    }

    fn inst(mask: BinaryMask, category_id: u32, confidence: f64) -> InstancePrediction {
        InstancePrediction { mask, category_id, confidence }
    }

    fn void_grid(w: u32, h: u32) -> SemanticMap {
        SemanticMap { width: w, height: h, labels: vec![0; (w * h) as usize] }
    }

    #[test]
    fn heavily_overlapped_instance_is_dropped() {
        // A covers rows 0..6 (60 px). B covers rows 3..10 (70 px), 40 free ≥ 35: kept.
        // C covers rows 2..8 (60 px), nothing free: dropped.
        let known = vec![
            inst(rect(10, 10, 0, 0, 10, 6), 1, 0.9),
            inst(rect(10, 10, 0, 3, 10, 10), 2, 0.8),
            inst(rect(10, 10, 0, 2, 10, 8), 1, 0.7),
        ];
        let map = fuse_panoptic(&known, &[], &void_grid(10, 10), &cats(), &FusionConfig::default()).unwrap();
        assert_eq!(map.segments.len(), 2);
        assert_eq!(map.segments[&1].area, 60);
        assert_eq!(map.segments[&2].area, 40);
        assert_eq!(map.void_pixels(), 0);
    }

    #[test]
    fn sixty_percent_overlap_drops_lower_instance() {
        // 50 px each, 30 px shared: the 0.8 instance keeps 20/50
        let known = vec![
            inst(rect(10, 10, 0, 0, 10, 5), 1, 0.9),
            inst(rect(10, 10, 0, 2, 10, 7), 2, 0.8),
        ];
        let map = fuse_panoptic(&known, &[], &void_grid(10, 10), &cats(), &FusionConfig::default()).unwrap();
        assert_eq!(map.segments.len(), 1);
        assert_eq!(map.segments[&1], SegmentInfo { category_id: 1, iscrowd: false, area: 50 });
        assert_eq!(map.void_pixels(), 50);
    }

    #[test]
    fn keep_fraction_boundary_is_inclusive() {
        // second mask has exactly half its pixels free
        let known = vec![
            inst(rect(10, 10, 0, 0, 10, 5), 1, 0.9),
            inst(rect(10, 10, 0, 0, 10, 10), 2, 0.5),
        ];
        let map = fuse_panoptic(&known, &[], &void_grid(10, 10), &cats(), &FusionConfig::default()).unwrap();
        assert_eq!(map.segments.len(), 2);
    }

    #[test]
    fn unknown_under_known_instance_vanishes() {
        let known = vec![inst(rect(10, 10, 0, 0, 6, 6), 1, 0.3)];
        let unknown = vec![inst(rect(10, 10, 1, 1, 5, 5), 9, 1.0)];
        let map = fuse_panoptic(&known, &unknown, &void_grid(10, 10), &cats(), &FusionConfig::default()).unwrap();
        assert!(map.segments.values().all(|s| s.category_id != 9));
    }

    #[test]
    fn stuff_fill_and_small_stuff_to_void() {
        let mut labels = vec![3u32; 100];
        labels[99] = 0;
        let sem = SemanticMap { width: 10, height: 10, labels };
        let known = vec![inst(rect(10, 10, 0, 0, 5, 5), 1, 0.9)];
        let cfg = FusionConfig { stuff_area_min: 74, ..Default::default() };
        let map = fuse_panoptic(&known, &[], &sem, &cats(), &cfg).unwrap();
        assert_eq!(map.segments[&2].category_id, 3);
        assert_eq!(map.segments[&2].area, 74);
        let cfg = FusionConfig { stuff_area_min: 75, ..Default::default() };
        let map = fuse_panoptic(&known, &[], &sem, &cats(), &cfg).unwrap();
        assert_eq!(map.segments.len(), 1);
        assert_eq!(map.void_pixels(), 75);
    }

    #[test]
    fn unknown_paints_void_only_unless_enabled() {
        let mut labels = vec![3u32; 100];
        for l in labels.iter_mut().skip(50) {
            *l = 0;
        }
        let sem = SemanticMap { width: 10, height: 10, labels };
        let unknown = vec![inst(rect(10, 10, 0, 3, 10, 7), 9, 0.6)];
        let cfg = FusionConfig { stuff_area_min: 1, ..Default::default() };
        let map = fuse_panoptic(&[], &unknown, &sem, &cats(), &cfg).unwrap();
        assert_eq!(map.segments[&2], SegmentInfo { category_id: 9, iscrowd: false, area: 20 });
        // only a quarter of this one lies on void
        let mostly_stuff = vec![inst(rect(10, 10, 0, 2, 10, 6), 9, 0.6)];
        let map = fuse_panoptic(&[], &mostly_stuff, &sem, &cats(), &cfg).unwrap();
        assert_eq!(map.segments.len(), 1);
        let cfg = FusionConfig { unknown_overwrite_stuff: true, ..cfg };
        let map = fuse_panoptic(&[], &unknown, &sem, &cats(), &cfg).unwrap();
        assert_eq!(map.segments[&2].area, 40);
        assert_eq!(map.segments[&1].area, 30);
    }

    #[test]
    fn order_ties_break_on_category_then_centroid() {
        let a = inst(rect(4, 1, 2, 0, 4, 1), 1, 0.5);
        let b = inst(rect(4, 1, 0, 0, 3, 1), 1, 0.5);
        let c = inst(rect(4, 1, 0, 0, 1, 1), 2, 0.5);
        let list = [a, b, c];
        let order: Vec<usize> = order_instances(&list).iter().map(|o| o.index).collect();
        // b's centroid x = 1 < a's 2.5; category 2 comes last
        assert_eq!(order, vec![1, 0, 2]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let c = cats();
        let sem = void_grid(4, 4);
        let bad_conf = [inst(rect(4, 4, 0, 0, 1, 1), 1, 1.5)];
        assert!(matches!(
            fuse_panoptic(&bad_conf, &[], &sem, &c, &FusionConfig::default()),
            Err(FusionError::Confidence(_))
        ));
        let bad_dims = [inst(rect(5, 4, 0, 0, 1, 1), 1, 0.5)];
        assert!(matches!(
            fuse_panoptic(&bad_dims, &[], &sem, &c, &FusionConfig::default()),
            Err(FusionError::DimensionMismatch { .. })
        ));
        let stuff_inst = [inst(rect(4, 4, 0, 0, 1, 1), 3, 0.5)];
        assert!(fuse_panoptic(&stuff_inst, &[], &sem, &c, &FusionConfig::default()).is_err());
        let known_as_unknown = [inst(rect(4, 4, 0, 0, 1, 1), 1, 0.5)];
        assert!(fuse_panoptic(&[], &known_as_unknown, &sem, &c, &FusionConfig::default()).is_err());
    }
}
