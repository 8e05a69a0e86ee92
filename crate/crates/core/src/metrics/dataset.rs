use rayon::prelude::*;

use super::{aggregate, match_segments, MatchResult, MetricReport, MetricsError};
use crate::types::{CategoryTable, PanopticMap};

/// One ground-truth / prediction pair.
#[derive(Debug, Clone)]
pub struct EvalPair {
    pub image_id: u64,
    pub gt: PanopticMap,
    pub pred: PanopticMap,
}

/// Evaluates in-memory pairs on `workers` threads.
pub fn evaluate_dataset(
    pairs: &[EvalPair],
    cats: &CategoryTable,
    workers: usize,
) -> Result<MetricReport, MetricsError> {
    let by_id: std::collections::HashMap<u64, &EvalPair> =
        pairs.iter().map(|p| (p.image_id, p)).collect();
    if by_id.len() != pairs.len() {
        let mut seen = std::collections::HashSet::new();
        let dup = pairs.iter().find(|p| !seen.insert(p.image_id)).unwrap();
        return Err(MetricsError::DuplicateImage(dup.image_id));
    }
    let ids: Vec<u64> = pairs.iter().map(|p| p.image_id).collect();
    evaluate_with(&ids, cats, workers, |id| {
        let p = by_id[&id];
        match_segments(&p.gt, &p.pred, cats)
    })
}

/// Evaluates images produced lazily by `matcher`, which is called once per id
/// and may load from disk. Results are reduced in ascending image-id order,
/// so the report does not depend on worker count or input order.
pub fn evaluate_with<F>(
    image_ids: &[u64],
    cats: &CategoryTable,
    workers: usize,
    matcher: F,
) -> Result<MetricReport, MetricsError>
where
    F: Fn(u64) -> Result<MatchResult, MetricsError> + Sync,
{
    let mut ids = image_ids.to_vec();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(MetricsError::DuplicateImage(w[0]));
    }
    let run_one = |&id: &u64| {
        matcher(id).map_err(|e| match e {
            e @ (MetricsError::Image { .. } | MetricsError::Load { .. }) => e,
            e => MetricsError::Image {
                image_id: id,
                source: Box::new(e),
            },
        })
    };
    let results: Vec<MatchResult> = if workers <= 1 {
        ids.iter().map(run_one).collect::<Result<_, _>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| MetricsError::Pool(e.to_string()))?;
        // collect() on an indexed parallel iterator keeps input order and
        // reports the error of the lowest failing index first.
        pool.install(|| ids.par_iter().map(run_one).collect::<Result<Vec<_>, _>>())?
    };
    Ok(aggregate(&results, cats))
}
