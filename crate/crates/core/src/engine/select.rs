use super::{dot, ClusterReport, EngineConfig, Exemplar, ExemplarSource, ExemplarStore, ProposalRecord};

/// Founds unknown classes from one clustering round.
///
/// The `top_cluster_count` tightest clusters (by average cosine similarity
/// to the centroid) are candidates; those whose average objectness reaches
/// the current threshold become classes, keeping members within
/// `membership_cos_dist` of the centroid as exemplars. Thresholds advance
/// once, after the round. Returns the new class ids.
pub fn select_unknown_clusters(
    reports: &[ClusterReport],
    buffer: &[ProposalRecord],
    unit_features: &[Vec<f64>],
    store: &mut ExemplarStore,
    cfg: &EngineConfig,
    step: u64,
) -> Vec<u32> {
    let mut ranked: Vec<&ClusterReport> = reports.iter().collect();
    ranked.sort_by(|a, b| {
        b.avg_cos_similarity_to_centroid
            .total_cmp(&a.avg_cos_similarity_to_centroid)
            .then(a.cluster.cmp(&b.cluster))
    });
    let threshold = store.current_objectness_threshold;
    let mut created = Vec::new();
    for report in ranked.into_iter().take(cfg.top_cluster_count()) {
        if report.avg_objectness < threshold {
            continue;
        }
        let exemplars: Vec<Exemplar> = report
            .members
            .iter()
            .filter(|&&i| 1.0 - dot(&unit_features[i], &report.centroid) <= cfg.membership_cos_dist)
            .map(|&i| Exemplar {
                image_id: buffer[i].image_id,
                bbox: buffer[i].bbox,
                objectness: buffer[i].objectness,
                feature: unit_features[i].clone(),
                source: ExemplarSource::Cluster,
                step,
            })
            .collect();
        if exemplars.is_empty() {
            continue;
        }
        created.push(store.create_class(step, exemplars));
    }
    store.found_class_count += created.len();
    store.advance_thresholds(cfg);
    created
}
