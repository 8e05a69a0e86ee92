//! Brute-force reference matcher.
//!
//! Evaluates every same-class segment pair with nested pixel loops and no
//! shared histogram. Slow, but used to derive expected reports for
//! synthetic data.

use std::collections::BTreeSet;

use super::{aggregate, EvalClass, MatchResult, MetricReport, SegmentMatch, SegmentRef};
use crate::types::{CategoryTable, PanopticMap, VOID_ID};

fn label(map: &PanopticMap, cats: &CategoryTable, id: u32) -> Option<(EvalClass, bool)> {
    if id == VOID_ID {
        return None;
    }
    let info = map.segments.get(&id)?;
    EvalClass::of(cats, info.category_id)?.map(|c| (c, info.iscrowd))
}

/// Matches one image; panics on maps that fail validation.
pub fn reference_match(gt: &PanopticMap, pred: &PanopticMap, cats: &CategoryTable) -> MatchResult {
    assert_eq!((gt.width, gt.height), (pred.width, pred.height));
    let n = gt.pixel_count();
    let gt_void = |i: usize| label(gt, cats, gt.pixels[i]).is_none();
    let mut result = MatchResult::default();
    let mut matched_gt = BTreeSet::new();
    let mut matched_pred = BTreeSet::new();

    for &gi in gt.segments.keys() {
        let Some((gc, crowd)) = label(gt, cats, gi) else { continue };
        if crowd {
            continue;
        }
        for &pi in pred.segments.keys() {
            let Some((pc, _)) = label(pred, cats, pi) else { continue };
            if pc != gc {
                continue;
            }
            let (mut inter, mut union) = (0u64, 0u64);
            for i in 0..n {
                let in_g = gt.pixels[i] == gi;
                let in_p = pred.pixels[i] == pi;
                if in_g && in_p {
                    inter += 1;
                }
                if in_g || (in_p && !gt_void(i)) {
                    union += 1;
                }
            }
            if inter > 0 && inter as f64 / union as f64 > 0.5 {
                matched_gt.insert(gi);
                matched_pred.insert(pi);
                result.matches.push(SegmentMatch {
                    gt_segment_id: gi,
                    pred_segment_id: pi,
                    class: gc,
                    iou: inter as f64 / union as f64,
                });
            }
        }
    }
    result.matches.sort_by_key(|m| (m.gt_segment_id, m.pred_segment_id));

    for &gi in gt.segments.keys() {
        if let Some((class, false)) = label(gt, cats, gi) {
            if !matched_gt.contains(&gi) {
                result.unmatched_gt.push(SegmentRef { segment_id: gi, class });
            }
        }
    }
    for &pi in pred.segments.keys() {
        let Some((pc, _)) = label(pred, cats, pi) else { continue };
        if matched_pred.contains(&pi) {
            continue;
        }
        let (mut area, mut covered) = (0u64, 0u64);
        for i in 0..n {
            if pred.pixels[i] != pi {
                continue;
            }
            area += 1;
            let on_ignore = match label(gt, cats, gt.pixels[i]) {
                None => true,
                Some((gc, crowd)) => crowd && gc == pc,
            };
            covered += u64::from(on_ignore);
        }
        if area == 0 {
            continue;
        }
        let r = SegmentRef { segment_id: pi, class: pc };
        if covered as f64 / area as f64 > 0.5 {
            result.ignored_pred.push(r);
        } else {
            result.unmatched_pred.push(r);
        }
    }
    result
}

/// Reference report over pairs, summed in the given order.
pub fn reference_report<'a>(
    pairs: impl IntoIterator<Item = (&'a PanopticMap, &'a PanopticMap)>,
    cats: &CategoryTable,
) -> MetricReport {
    let results: Vec<MatchResult> = pairs
        .into_iter()
        .map(|(g, p)| reference_match(g, p, cats))
        .collect();
    aggregate(&results, cats)
}
