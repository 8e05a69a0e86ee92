use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{CategoryTable, VOID_ID};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentInfo {
    pub category_id: u32,
    pub iscrowd: bool,
    pub area: u64,
}

/// Row-major grid of per-image segment ids plus the segment table.
///
/// Pixel value [`VOID_ID`] marks void. Segment ids are local to one image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PanopticMap {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u32>,
    pub segments: BTreeMap<u32, SegmentInfo>,
}

impl PanopticMap {
    /// A fully void map.
    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            pixels: vec![VOID_ID; width as usize * height as usize],
            segments: BTreeMap::new(),
        }
    }

    /// Builds a map from pixels and a `segment id → (category, iscrowd)` table,
    /// filling areas from the pixel counts. Table entries with no pixels are dropped.
    pub fn from_pixels(
        width: u32,
        height: u32,
        pixels: Vec<u32>,
        labels: &BTreeMap<u32, (u32, bool)>,
    ) -> Self {
        let counts = pixel_counts(&pixels);
        let segments = labels
            .iter()
            .filter_map(|(&id, &(category_id, iscrowd))| {
                let area = counts.get(&id).copied().unwrap_or(0);
                (id != VOID_ID && area > 0).then_some((
                    id,
                    SegmentInfo {
                        category_id,
                        iscrowd,
                        area,
                    },
                ))
            })
            .collect();
        Self {
            width,
            height,
            pixels,
            segments,
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn at(&self, x: u32, y: u32) -> u32 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    pub fn void_pixels(&self) -> u64 {
        self.pixels.iter().filter(|&&p| p == VOID_ID).count() as u64
    }

    /// Tight `[x, y, w, h]` box of a segment, if present.
    pub fn segment_bbox(&self, id: u32) -> Option<[u32; 4]> {
        let w = self.width as usize;
        let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0u32, 0u32);
        for (i, _) in self.pixels.iter().enumerate().filter(|(_, &p)| p == id) {
            let (x, y) = ((i % w) as u32, (i / w) as u32);
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        (x0 != u32::MAX).then(|| [x0, y0, x1 - x0 + 1, y1 - y0 + 1])
    }
}

pub(crate) fn pixel_counts(pixels: &[u32]) -> HashMap<u32, u64> {
    let mut counts = HashMap::new();
    let mut iter = pixels.iter();
    let Some(&first) = iter.next() else {
        return counts;
    };
    let (mut run_id, mut run_len) = (first, 1u64);
    for &p in iter {
        if p == run_id {
            run_len += 1;
        } else {
            *counts.entry(run_id).or_insert(0) += run_len;
            run_id = p;
            run_len = 1;
        }
    }
    *counts.entry(run_id).or_insert(0) += run_len;
    counts
}

/// A single problem found by [`validate_map`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    DimensionMismatch { expected: usize, actual: usize },
    ReservedSegmentId,
    UnknownCategory { segment_id: u32, category_id: u32 },
    AreaMismatch { segment_id: u32, stored: u64, actual: u64 },
    EmptySegment { segment_id: u32 },
    OrphanSegment { segment_id: u32, pixels: u64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DimensionMismatch { expected, actual } => {
                write!(f, "dimension mismatch: expected {expected} pixels, got {actual}")
            }
            Self::ReservedSegmentId => write!(f, "segment table uses reserved id 0"),
            Self::UnknownCategory {
                segment_id,
                category_id,
            } => write!(f, "unknown category {category_id} on segment {segment_id}"),
            Self::AreaMismatch {
                segment_id,
                stored,
                actual,
            } => write!(
                f,
                "area mismatch on segment {segment_id}: stored {stored}, counted {actual}"
            ),
            Self::EmptySegment { segment_id } => write!(f, "segment {segment_id} has zero area"),
            Self::OrphanSegment { segment_id, pixels } => write!(
                f,
                "orphan segment {segment_id} ({pixels} pixels) missing from table"
            ),
        }
    }
}

/// Checks the map invariants against `cats`. An empty list means the map is valid.
pub fn validate_map(map: &PanopticMap, cats: &CategoryTable) -> Vec<Violation> {
    let mut out = Vec::new();
    if map.pixels.len() != map.pixel_count() {
        out.push(Violation::DimensionMismatch {
            expected: map.pixel_count(),
            actual: map.pixels.len(),
        });
        return out;
    }
    if map.segments.contains_key(&VOID_ID) {
        out.push(Violation::ReservedSegmentId);
    }
    let counts = pixel_counts(&map.pixels);
    for (&segment_id, info) in &map.segments {
        if cats.get(info.category_id).is_none() {
            out.push(Violation::UnknownCategory {
                segment_id,
                category_id: info.category_id,
            });
        }
        if info.area == 0 {
            out.push(Violation::EmptySegment { segment_id });
        }
        let actual = counts.get(&segment_id).copied().unwrap_or(0);
        if segment_id != VOID_ID && actual != info.area {
            out.push(Violation::AreaMismatch {
                segment_id,
                stored: info.area,
                actual,
            });
        }
    }
    let mut orphans: Vec<_> = counts
        .iter()
        .filter(|(id, _)| **id != VOID_ID && !map.segments.contains_key(id))
        .map(|(&segment_id, &pixels)| Violation::OrphanSegment { segment_id, pixels })
        .collect();
    orphans.sort_by_key(|v| match v {
        Violation::OrphanSegment { segment_id, .. } => *segment_id,
        _ => 0,
    });
    out.extend(orphans);
    out
}
