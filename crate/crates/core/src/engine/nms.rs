use std::cmp::Ordering;
use std::collections::BTreeMap;

use super::ProposalRecord;
use crate::types::box_iou;

/// Descending objectness, then ascending image id and box corners.
pub(crate) fn score_order(a: &ProposalRecord, b: &ProposalRecord) -> Ordering {
    b.objectness
        .total_cmp(&a.objectness)
        .then(a.image_id.cmp(&b.image_id))
        .then(a.bbox.cmp(&b.bbox))
}

/// Greedy per-image NMS. A box is dropped when its IoU with a kept,
/// higher-ranked box of the same image exceeds `iou_thresh`. Survivors are
/// returned in rank order.
pub fn dedup_nms(proposals: &[ProposalRecord], iou_thresh: f64) -> Vec<ProposalRecord> {
    let mut order: Vec<&ProposalRecord> = proposals.iter().collect();
    order.sort_by(|a, b| score_order(a, b));
    let mut kept_per_image: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    let mut kept: Vec<ProposalRecord> = Vec::new();
    for p in order {
        let same_image = kept_per_image.entry(p.image_id).or_default();
        if same_image
            .iter()
            .all(|&k| box_iou(&kept[k].bbox, &p.bbox) <= iou_thresh)
        {
            same_image.push(kept.len());
            kept.push(p.clone());
        }
    }
    kept
}
