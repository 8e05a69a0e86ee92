use rayon::prelude::*;

use super::{dot, normalize, EngineError, Exemplar, ExemplarSource, ExemplarStore, ProposalRecord};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinedAssignment {
    /// Index into the input proposals.
    pub index: usize,
    pub class_id: u32,
    /// Cosine distance to the nearest exemplar of the class.
    pub distance: f64,
}

/// Accepts proposals whose nearest exemplar of some class lies within the
/// store's current mining distance, choosing the nearest such class (ties go
/// to the lower id). All decisions use the store as it was on entry; the
/// accepted proposals are then appended as exemplars.
pub fn mine_exemplars(
    proposals: &[ProposalRecord],
    store: &mut ExemplarStore,
    step: u64,
) -> Result<Vec<MinedAssignment>, EngineError> {
    if store.is_empty() {
        return Ok(Vec::new());
    }
    if let Some(p) = proposals.iter().find(|p| p.feature.len() != store.feature_dim) {
        return Err(EngineError::DimensionMismatch {
            expected: store.feature_dim,
            actual: p.feature.len(),
        });
    }
    let threshold = store.current_mining_distance;
    let frozen = &*store;
    let decisions: Vec<Option<(MinedAssignment, Vec<f64>)>> = proposals
        .par_iter()
        .enumerate()
        .map(|(index, p)| {
            let f = normalize(&p.feature)?;
            let mut best: Option<(u32, f64)> = None;
            for class in frozen.classes.values() {
                let d = class
                    .exemplars
                    .iter()
                    .map(|e| 1.0 - dot(&f, &e.feature))
                    .fold(f64::INFINITY, f64::min);
                // strict < keeps the lower class id on ties (ids ascend)
                if d <= threshold && best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((class.id, d));
                }
            }
            best.map(|(class_id, distance)| {
                (
                    MinedAssignment {
                        index,
                        class_id,
                        distance,
                    },
                    f,
                )
            })
        })
        .collect();
    let mut accepted = Vec::new();
    for (m, feature) in decisions.into_iter().flatten() {
        let p = &proposals[m.index];
        store
            .classes
            .get_mut(&m.class_id)
            .expect("class exists")
            .exemplars
            .push(Exemplar {
                image_id: p.image_id,
                bbox: p.bbox,
                objectness: p.objectness,
                feature,
                source: ExemplarSource::Mined,
                step,
            });
        accepted.push(m);
    }
    Ok(accepted)
}
