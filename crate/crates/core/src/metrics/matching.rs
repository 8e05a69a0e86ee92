use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use super::histogram::{check_dims, joint_counts};
use super::{MetricsError, Side};
use crate::types::{CategoryStatus, CategoryTable, PanopticMap, VOID_ID};

/// Class a segment is scored under: known categories keep their id, every
/// unknown category collapses into [`EvalClass::Unknown`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EvalClass {
    Category(u32),
    Unknown,
}

impl EvalClass {
    /// `None` for void categories, which behave like unlabeled pixels.
    pub fn of(cats: &CategoryTable, category_id: u32) -> Option<Option<Self>> {
        let c = cats.get(category_id)?;
        Some(match c.status {
            CategoryStatus::Known => Some(Self::Category(category_id)),
            CategoryStatus::Unknown => Some(Self::Unknown),
            CategoryStatus::Void => None,
        })
    }
}

impl fmt::Display for EvalClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Category(id) => write!(f, "{id}"),
            Self::Unknown => f.write_str("unknown"),
        }
    }
}

impl FromStr for EvalClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "unknown" {
            return Ok(Self::Unknown);
        }
        s.parse()
            .map(Self::Category)
            .map_err(|_| format!("invalid evaluation class {s:?}"))
    }
}

impl Serialize for EvalClass {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EvalClass {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentMatch {
    pub gt_segment_id: u32,
    pub pred_segment_id: u32,
    pub class: EvalClass,
    pub iou: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentRef {
    pub segment_id: u32,
    pub class: EvalClass,
}

/// Per-image matching outcome. Lists are ordered by segment id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub matches: Vec<SegmentMatch>,
    pub unmatched_gt: Vec<SegmentRef>,
    pub unmatched_pred: Vec<SegmentRef>,
    /// Unmatched predictions mostly covered by void or same-class crowd.
    pub ignored_pred: Vec<SegmentRef>,
}

struct SideLabels {
    /// segment id → (class or void, iscrowd)
    labels: HashMap<u32, (Option<EvalClass>, bool)>,
    areas: BTreeMap<u32, u64>,
}

fn resolve_side(
    map: &PanopticMap,
    cats: &CategoryTable,
    side: Side,
    pixel_ids: impl Iterator<Item = (u32, u64)>,
) -> Result<SideLabels, MetricsError> {
    let mut labels = HashMap::with_capacity(map.segments.len());
    for (&segment_id, info) in &map.segments {
        let class = EvalClass::of(cats, info.category_id).ok_or(MetricsError::UnknownCategory {
            side,
            segment_id,
            category_id: info.category_id,
        })?;
        labels.insert(segment_id, (class, info.iscrowd));
    }
    let mut areas = BTreeMap::new();
    for (id, n) in pixel_ids {
        if id == VOID_ID {
            continue;
        }
        if !labels.contains_key(&id) {
            return Err(MetricsError::OrphanSegment {
                side,
                segment_id: id,
            });
        }
        *areas.entry(id).or_insert(0) += n;
    }
    Ok(SideLabels { labels, areas })
}

/// Matches the segments of one prediction against its ground truth.
pub fn match_segments(
    gt: &PanopticMap,
    pred: &PanopticMap,
    cats: &CategoryTable,
) -> Result<MatchResult, MetricsError> {
    check_dims(gt, pred)?;
    let joint = joint_counts(&gt.pixels, &pred.pixels);
    let g = resolve_side(
        gt,
        cats,
        Side::GroundTruth,
        joint.iter().map(|(&(gi, _), &n)| (gi, n)),
    )?;
    let p = resolve_side(
        pred,
        cats,
        Side::Prediction,
        joint.iter().map(|(&(_, pi), &n)| (pi, n)),
    )?;

    let gt_class = |id: u32| -> Option<(EvalClass, bool)> {
        if id == VOID_ID {
            return None;
        }
        let (class, crowd) = g.labels[&id];
        class.map(|c| (c, crowd))
    };
    let pred_class = |id: u32| -> Option<EvalClass> {
        if id == VOID_ID {
            None
        } else {
            p.labels[&id].0
        }
    };

    // Prediction pixels on ground-truth void, and on same-class crowd.
    let mut on_void: HashMap<u32, u64> = HashMap::new();
    let mut on_crowd: HashMap<u32, u64> = HashMap::new();
    for (&(gi, pi), &n) in &joint {
        let Some(pc) = pred_class(pi) else { continue };
        match gt_class(gi) {
            None => *on_void.entry(pi).or_insert(0) += n,
            Some((gc, true)) if gc == pc => *on_crowd.entry(pi).or_insert(0) += n,
            _ => {}
        }
    }

    let mut pairs: Vec<(&(u32, u32), &u64)> = joint.iter().collect();
    pairs.sort_unstable_by_key(|(k, _)| **k);

    let mut result = MatchResult::default();
    let mut matched_gt = BTreeSet::new();
    let mut matched_pred = BTreeSet::new();
    for (&(gi, pi), &inter) in pairs {
        let (Some((gc, crowd)), Some(pc)) = (gt_class(gi), pred_class(pi)) else {
            continue;
        };
        if crowd || gc != pc {
            continue;
        }
        let union = g.areas[&gi] + p.areas[&pi] - inter - on_void.get(&pi).copied().unwrap_or(0);
        let iou = inter as f64 / union as f64;
        if iou > 0.5 {
            matched_gt.insert(gi);
            matched_pred.insert(pi);
            result.matches.push(SegmentMatch {
                gt_segment_id: gi,
                pred_segment_id: pi,
                class: gc,
                iou,
            });
        }
    }

    for &gi in g.areas.keys() {
        if matched_gt.contains(&gi) {
            continue;
        }
        if let Some((class, false)) = gt_class(gi) {
            result.unmatched_gt.push(SegmentRef {
                segment_id: gi,
                class,
            });
        }
    }
    for (&pi, &area) in &p.areas {
        if matched_pred.contains(&pi) {
            continue;
        }
        let Some(class) = pred_class(pi) else { continue };
        let covered = on_void.get(&pi).copied().unwrap_or(0) + on_crowd.get(&pi).copied().unwrap_or(0);
        let r = SegmentRef {
            segment_id: pi,
            class,
        };
        if covered as f64 / area as f64 > 0.5 {
            result.ignored_pred.push(r);
        } else {
            result.unmatched_pred.push(r);
        }
    }
    Ok(result)
}
