use std::collections::{BTreeMap, HashMap};

use super::{MetricsError, Side};
use crate::types::PanopticMap;

/// Joint pixel count of `(gt segment id, pred segment id)` pairs, void included.
pub type JointHistogram = BTreeMap<(u32, u32), u64>;

pub(crate) fn check_dims(gt: &PanopticMap, pred: &PanopticMap) -> Result<(), MetricsError> {
    if (gt.width, gt.height) != (pred.width, pred.height) {
        return Err(MetricsError::DimensionMismatch {
            gt: (gt.width, gt.height),
            pred: (pred.width, pred.height),
        });
    }
    for (side, m) in [(Side::GroundTruth, gt), (Side::Prediction, pred)] {
        if m.pixels.len() != m.pixel_count() {
            return Err(MetricsError::BadPixelBuffer {
                side,
                expected: m.pixel_count(),
                actual: m.pixels.len(),
            });
        }
    }
    Ok(())
}

/// Single pass over both maps. Runs of identical pairs are merged before
/// touching the hash table, which is what keeps large maps fast.
pub(crate) fn joint_counts(gt: &[u32], pred: &[u32]) -> HashMap<(u32, u32), u64> {
    let mut counts: HashMap<(u32, u32), u64> = HashMap::new();
    let mut pairs = gt.iter().copied().zip(pred.iter().copied());
    let Some(mut run) = pairs.next() else {
        return counts;
    };
    let mut run_len = 1u64;
    for pair in pairs {
        if pair == run {
            run_len += 1;
        } else {
            *counts.entry(run).or_insert(0) += run_len;
            run = pair;
            run_len = 1;
        }
    }
    *counts.entry(run).or_insert(0) += run_len;
    counts
}

pub fn intersect_histogram(
    gt: &PanopticMap,
    pred: &PanopticMap,
) -> Result<JointHistogram, MetricsError> {
    check_dims(gt, pred)?;
    Ok(joint_counts(&gt.pixels, &pred.pixels).into_iter().collect())
}
