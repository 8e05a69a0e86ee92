use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kmeans::kmeans_unit;
use super::{
    cluster_reports, dedup_nms, mine_exemplars, normalize, sample_proposals,
    select_unknown_clusters, EngineConfig, EngineError, ExemplarSource, ExemplarStore,
    FeatureProvider, ProposalRecord,
};
use crate::types::BoundingBox;

/// One discovered box with its unknown class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabel {
    pub image_id: u64,
    pub x: i32,
    pub y: i32,
    pub w: u32,
    pub h: u32,
    pub class_id: u32,
    pub source: ExemplarSource,
}

/// What happened in one clustering round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundSummary {
    pub step: u64,
    pub buffered: usize,
    pub kmeans_iterations: usize,
    pub degenerate: bool,
    pub created_classes: Vec<u32>,
    pub objectness_threshold: f64,
    pub mining_distance: f64,
}

#[derive(Debug, Clone)]
pub struct DiscoveryOutput {
    pub store: ExemplarStore,
    pub pseudo_labels: Vec<PseudoLabel>,
    pub rounds: Vec<RoundSummary>,
}

struct Buffered {
    record: ProposalRecord,
    unit: Vec<f64>,
}

/// The clustering / mining state machine, fed one batch per step.
pub struct DiscoveryEngine<'p> {
    cfg: EngineConfig,
    provider: &'p dyn FeatureProvider,
    store: ExemplarStore,
    buffer: Vec<Buffered>,
    rng: ChaCha8Rng,
    step: u64,
    rounds: Vec<RoundSummary>,
}

impl<'p> DiscoveryEngine<'p> {
    pub fn new(
        cfg: EngineConfig,
        feature_dim: usize,
        provider: &'p dyn FeatureProvider,
    ) -> Result<Self, EngineError> {
        cfg.validate()?;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(cfg.rng_seed),
            store: ExemplarStore::new(&cfg, feature_dim),
            cfg,
            provider,
            buffer: Vec::new(),
            step: 0,
            rounds: Vec::new(),
        })
    }

    pub fn store(&self) -> &ExemplarStore {
        &self.store
    }

    pub fn rounds(&self) -> &[RoundSummary] {
        &self.rounds
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    /// Processes the next batch: dedup, sample, mine, buffer, and cluster when
    /// the interval is reached.
    pub fn step(&mut self, batch: &[ProposalRecord]) -> Result<(), EngineError> {
        self.step += 1;
        let step = self.step;
        self.run_step(batch).map_err(|e| EngineError::AtStep {
            step,
            source: Box::new(e),
        })
    }

    fn run_step(&mut self, batch: &[ProposalRecord]) -> Result<(), EngineError> {
        let dim = self.store.feature_dim;
        if let Some(p) = batch.iter().find(|p| p.feature.len() != dim) {
            return Err(EngineError::DimensionMismatch {
                expected: dim,
                actual: p.feature.len(),
            });
        }
        let deduped = dedup_nms(batch, self.cfg.nms_iou);
        let sampled = sample_proposals(
            &deduped,
            self.cfg.max_proposals_per_batch,
            self.cfg.min_box_area,
            &mut self.rng,
        );
        let mined = mine_exemplars(&sampled, &mut self.store, self.step)?;
        let mut taken = vec![false; sampled.len()];
        mined.iter().for_each(|m| taken[m.index] = true);
        for (record, taken) in sampled.into_iter().zip(taken) {
            if taken {
                continue;
            }
            if let Some(unit) = normalize(&record.feature) {
                self.buffer.push(Buffered { record, unit });
            }
        }
        if self.step.is_multiple_of(self.cfg.cluster_interval_steps) {
            self.cluster_round()?;
        }
        Ok(())
    }

    fn cluster_round(&mut self) -> Result<(), EngineError> {
        self.store.refresh_features(self.provider)?;
        let buffer = std::mem::take(&mut self.buffer);
        let mut summary = RoundSummary {
            step: self.step,
            buffered: buffer.len(),
            kmeans_iterations: 0,
            degenerate: false,
            created_classes: Vec::new(),
            objectness_threshold: self.store.current_objectness_threshold,
            mining_distance: self.store.current_mining_distance,
        };
        if !buffer.is_empty() {
            let dim = self.store.feature_dim;
            let flat: Vec<f64> = buffer.iter().flat_map(|b| b.unit.iter().copied()).collect();
            let seed = self.cfg.rng_seed ^ self.step.wrapping_mul(0x9e37_79b9_7f4a_7c15);
            let result = kmeans_unit(&flat, dim, self.cfg.k_clusters, seed, self.cfg.kmeans_max_iters);
            let (records, units): (Vec<ProposalRecord>, Vec<Vec<f64>>) =
                buffer.into_iter().map(|b| (b.record, b.unit)).unzip();
            let objectness: Vec<f64> = records.iter().map(|r| f64::from(r.objectness)).collect();
            let reports = cluster_reports(&units, &objectness, &result);
            summary.kmeans_iterations = result.iterations;
            summary.degenerate = result.degenerate;
            summary.created_classes = select_unknown_clusters(
                &reports,
                &records,
                &units,
                &mut self.store,
                &self.cfg,
                self.step,
            );
            summary.objectness_threshold = self.store.current_objectness_threshold;
            summary.mining_distance = self.store.current_mining_distance;
        }
        self.rounds.push(summary);
        Ok(())
    }

    pub fn finish(self) -> DiscoveryOutput {
        let pseudo_labels = pseudo_labels(&self.store);
        DiscoveryOutput {
            store: self.store,
            pseudo_labels,
            rounds: self.rounds,
        }
    }
}

fn pseudo_labels(store: &ExemplarStore) -> Vec<PseudoLabel> {
    store
        .classes
        .values()
        .flat_map(|c| {
            c.exemplars.iter().map(move |e| {
                let BoundingBox { x, y, w, h } = e.bbox;
                PseudoLabel {
                    image_id: e.image_id,
                    x,
                    y,
                    w,
                    h,
                    class_id: c.id,
                    source: e.source,
                }
            })
        })
        .collect()
}

/// Runs the engine over a whole stream of batches in step order.
pub fn run_discovery<I, B>(
    stream: I,
    feature_dim: usize,
    cfg: &EngineConfig,
    provider: &dyn FeatureProvider,
) -> Result<DiscoveryOutput, EngineError>
where
    I: IntoIterator<Item = B>,
    B: AsRef<[ProposalRecord]>,
{
    let mut engine = DiscoveryEngine::new(cfg.clone(), feature_dim, provider)?;
    for batch in stream {
        engine.step(batch.as_ref())?;
    }
    Ok(engine.finish())
}

/// Writes pseudo-labels as CSV with an `image_id,x,y,w,h,class_id,source` header.
pub fn write_pseudo_labels(w: impl Write, labels: &[PseudoLabel]) -> Result<(), EngineError> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(["image_id", "x", "y", "w", "h", "class_id", "source"])
        .map_err(|e| EngineError::Format(e.to_string()))?;
    for l in labels {
        out.serialize(l).map_err(|e| EngineError::Format(e.to_string()))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_pseudo_labels(r: impl Read) -> Result<Vec<PseudoLabel>, EngineError> {
    csv::Reader::from_reader(r)
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| EngineError::Format(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::StaticFeatures;

    fn batch(step: u64, dirs: &[[f32; 3]], objectness: f32) -> Vec<ProposalRecord> {
        dirs.iter()
            .enumerate()
            .map(|(i, d)| ProposalRecord {
                image_id: step,
                bbox: BoundingBox::new(i as i32 * 50, 0, 40, 40).unwrap(),
                objectness,
                feature: d.to_vec(),
                in_void: true,
            })
            .collect()
    }

    #[test]
    fn empty_stream_gives_empty_store() {
        let provider = StaticFeatures::default();
        let out = run_discovery(Vec::<Vec<ProposalRecord>>::new(), 3, &EngineConfig::default(), &provider).unwrap();
        assert!(out.store.is_empty() && out.pseudo_labels.is_empty() && out.rounds.is_empty());
    }

    #[test]
    fn one_round_per_interval() {
        let steps: Vec<_> = (0..200).map(|s| batch(s, &[[1.0, 0.0, 0.0]; 20], 0.3)).collect();
        let provider = StaticFeatures::from_records(steps.iter().flatten());
        let out = run_discovery(&steps, 3, &EngineConfig::default(), &provider).unwrap();
        assert_eq!(out.rounds.len(), 1);
        assert_eq!(out.rounds[0].step, 200);
        assert_eq!(out.rounds[0].buffered, 4000);
        assert!(out.store.is_empty(), "low objectness founds nothing");
    }

    #[test]
    fn tight_cluster_founds_class_then_mines() {
        let cfg = EngineConfig {
            k_clusters: 2,
            cluster_interval_steps: 2,
            top_cluster_fraction: 1.0,
            ..Default::default()
        };
        let a = [1.0, 0.001, 0.0];
        let b = [0.0, 0.0, 1.0];
        let steps = vec![
            batch(1, &[a, a, b], 0.95),
            batch(2, &[a, b], 0.95),
            batch(3, &[a, [0.0, 1.0, 0.0]], 0.95),
        ];
        let provider = StaticFeatures::from_records(steps.iter().flatten());
        let out = run_discovery(&steps, 3, &cfg, &provider).unwrap();
        assert_eq!(out.store.classes.len(), 2);
        let mined: Vec<_> = out.pseudo_labels.iter().filter(|l| l.source == ExemplarSource::Mined).collect();
        assert_eq!(mined.len(), 1);
        assert_eq!(mined[0].image_id, 3);

        let mut csv_out = Vec::new();
        write_pseudo_labels(&mut csv_out, &out.pseudo_labels).unwrap();
        let text = String::from_utf8(csv_out).unwrap();
        assert!(text.starts_with("image_id,x,y,w,h,class_id,source\n"));
        assert!(text.contains(",mined\n"));
    }

    #[test]
    fn step_errors_carry_index() {
        let provider = StaticFeatures::default();
        let steps = vec![batch(1, &[[1.0, 0.0, 0.0]], 0.5), vec![ProposalRecord { feature: vec![1.0], ..batch(2, &[[1.0, 0.0, 0.0]], 0.5)[0].clone() }]];
        let err = run_discovery(&steps, 3, &EngineConfig::default(), &provider).unwrap_err();
        assert!(matches!(err, EngineError::AtStep { step: 2, .. }), "{err}");
    }

    #[test]
    fn empty_label_file_keeps_header() {
        let mut buf = Vec::new();
        write_pseudo_labels(&mut buf, &[]).unwrap();
        assert_eq!(buf, b"image_id,x,y,w,h,class_id,source\n");
        assert!(read_pseudo_labels(&buf[..]).unwrap().is_empty());
    }
}
