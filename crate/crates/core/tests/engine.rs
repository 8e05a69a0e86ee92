use std::collections::{BTreeMap, HashMap};

use openset_panoptic::engine::*;
use openset_panoptic::synth::{generate_synthetic_features, SynthConfig, SyntheticFeatures};
use openset_panoptic::types::BoundingBox;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_stream(seed: u64) -> SyntheticFeatures {
    generate_synthetic_features(&SynthConfig {
        n_planted_classes: 4,
        points_per_class: 100,
        feature_dim: 32,
        rng_seed: seed,
        ..Default::default()
    })
    .unwrap()
}

fn small_cfg() -> EngineConfig {
    EngineConfig { k_clusters: 16, cluster_interval_steps: 10, top_cluster_fraction: 0.5, rng_seed: 5, ..Default::default() }
}

fn batches(records: &[ProposalRecord]) -> Vec<Vec<ProposalRecord>> {
    let mut by: BTreeMap<u64, Vec<ProposalRecord>> = BTreeMap::new();
    for r in records {
        by.entry(r.image_id).or_default().push(r.clone());
    }
    by.into_values().collect()
}

fn run(s: &SyntheticFeatures, cfg: &EngineConfig) -> DiscoveryOutput {
    let provider = StaticFeatures::from_records(&s.records);
    run_discovery(batches(&s.records), s.feature_dim, cfg, &provider).unwrap()
}

#[test]
fn discovery_is_deterministic() {
    let s = small_stream(1);
    let (a, b) = (run(&s, &small_cfg()), run(&s, &small_cfg()));
    assert!(!a.store.is_empty());
    assert_eq!(a.store, b.store);
    assert_eq!(a.pseudo_labels, b.pseudo_labels);
    assert_eq!(a.rounds, b.rounds);
}

#[test]
fn step_invariants_hold_throughout() {
    let s = small_stream(2);
    let cfg = small_cfg();
    let provider = StaticFeatures::from_records(&s.records);
    let mut engine = DiscoveryEngine::new(cfg, s.feature_dim, &provider).unwrap();
    let mut sizes: BTreeMap<u32, usize> = BTreeMap::new();
    let (mut obj, mut dist) = (0.0, f64::INFINITY);
    for batch in batches(&s.records) {
        engine.step(&batch).unwrap();
        let store = engine.store();
        for c in store.classes.values() {
            assert!(c.exemplars.len() >= sizes.get(&c.id).copied().unwrap_or(0));
            sizes.insert(c.id, c.exemplars.len());
            for e in &c.exemplars {
                let n = e.feature.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!((n - 1.0).abs() < 1e-9);
            }
        }
        assert!(sizes.keys().all(|id| store.classes.contains_key(id)));
        assert!(store.current_objectness_threshold >= obj);
        assert!(store.current_mining_distance <= dist);
        obj = store.current_objectness_threshold;
        dist = store.current_mining_distance;
    }
    assert!(!sizes.is_empty());
}

#[test]
fn positive_scaling_changes_no_decision() {
    let s = small_stream(3);
    let mut scaled = s.clone();
    for r in &mut scaled.records {
        r.feature.iter_mut().for_each(|x| *x *= 4.0);
    }
    let (a, b) = (run(&s, &small_cfg()), run(&scaled, &small_cfg()));
    assert_eq!(a.pseudo_labels, b.pseudo_labels);
    for (x, y) in a.rounds.iter().zip(&b.rounds) {
        assert_eq!(x.created_classes, y.created_classes);
    }
}

#[test]
fn planted_stream_mines_every_planted_record_and_no_distractor() {
    let s = generate_synthetic_features(&SynthConfig {
        n_planted_classes: 4,
        points_per_class: 150,
        feature_dim: 64,
        intra_class_cos_dist_max: 0.02,
        planted_spread: 0.004,
        rng_seed: 4,
        ..Default::default()
    })
    .unwrap();
    let out = run(&s, &small_cfg());
    let truth: HashMap<(u64, BoundingBox), Option<u32>> = s.truth.iter().map(|t| ((t.image_id, t.bbox), t.class)).collect();
    let label_of = |l: &PseudoLabel| truth[&(l.image_id, BoundingBox::new(l.x, l.y, l.w, l.h).unwrap())];
    // planted class of each discovered class, from its founding exemplars
    let mut planted_of: BTreeMap<u32, u32> = BTreeMap::new();
    for l in out.pseudo_labels.iter().filter(|l| l.source == ExemplarSource::Cluster) {
        let p = label_of(l).expect("no distractor is clustered into a class");
        assert_eq!(*planted_of.entry(l.class_id).or_insert(p), p);
    }
    let mut founded: BTreeMap<u32, u64> = BTreeMap::new();
    for c in out.store.classes.values() {
        let f = founded.entry(planted_of[&c.id]).or_insert(c.founded_at);
        *f = (*f).min(c.founded_at);
    }
    assert_eq!(founded.len(), 4);
    let labelled: HashMap<(u64, BoundingBox), (u32, ExemplarSource)> = out
        .pseudo_labels
        .iter()
        .map(|l| ((l.image_id, BoundingBox::new(l.x, l.y, l.w, l.h).unwrap()), (l.class_id, l.source)))
        .collect();
    // one image per step, so image ids are steps
    for t in &s.truth {
        let got = labelled.get(&(t.image_id, t.bbox));
        match t.class {
            Some(p) if t.image_id > founded[&p] => {
                let (class, source) = got.expect("planted record mined");
                assert_eq!((planted_of[class], *source), (p, ExemplarSource::Mined));
            }
            Some(_) => {}
            None => assert_eq!(got, None),
        }
    }
}

#[test]
fn refreshed_features_drive_later_mining() {
    let s = small_stream(6);
    let provider = StaticFeatures::from_records(&s.records);
    let cfg = small_cfg();
    let mut engine = DiscoveryEngine::new(cfg.clone(), s.feature_dim, &provider).unwrap();
    let bs = batches(&s.records);
    for b in &bs[..10] {
        engine.step(b).unwrap();
    }
    let mut store = engine.store().clone();
    assert!(!store.is_empty());
    // every exemplar now reports the feature of the record one slot later
    let next: HashMap<(u64, BoundingBox), Vec<f32>> = s
        .records
        .iter()
        .zip(s.records.iter().cycle().skip(1))
        .map(|(a, b)| ((a.image_id, a.bbox), b.feature.clone()))
        .collect();
    let permuted = |id: u64, b: &BoundingBox| next.get(&(id, *b)).cloned().ok_or_else(|| "missing".to_string());
    refresh_features(&mut store, &permuted).unwrap();

    let probes: Vec<ProposalRecord> = s.records[200..400].to_vec();
    let expect: Vec<Option<u32>> = probes
        .iter()
        .map(|p| {
            let q = normalize(&p.feature).unwrap();
            let mut best: Option<(f64, u32)> = None;
            for c in store.classes.values() {
                let d = c
                    .exemplars
                    .iter()
                    .map(|e| {
                        let f = normalize(&next[&(e.image_id, e.bbox)]).unwrap();
                        1.0 - q.iter().zip(&f).map(|(a, b)| a * b).sum::<f64>()
                    })
                    .fold(f64::INFINITY, f64::min);
                if d <= store.current_mining_distance && best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, c.id));
                }
            }
            best.map(|(_, id)| id)
        })
        .collect();
    let mined = mine_exemplars(&probes, &mut store, 99).unwrap();
    let mut got = vec![None; probes.len()];
    for m in mined {
        got[m.index] = Some(m.class_id);
    }
    assert_eq!(got, expect);
    assert!(expect.iter().any(Option::is_some));
}

fn planted_points(rng: &mut ChaCha8Rng, k: usize, per: usize, dim: usize, noise: f64) -> (Vec<Vec<f32>>, Vec<usize>) {
    let centers: Vec<Vec<f64>> = (0..k)
        .map(|c| (0..dim).map(|d| if d == c { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut pts = Vec::new();
    let mut labels = Vec::new();
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..per {
            pts.push(center.iter().map(|x| (x + rng.random_range(-noise..noise)) as f32).collect());
            labels.push(c);
        }
    }
    (pts, labels)
}

#[test]
fn kmeans_objective_never_rises_on_random_instances() {
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..80);
        let dim = rng.random_range(2..10);
        let pts: Vec<Vec<f32>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0f32..1.0) + 1e-3).collect())
            .collect();
        let k = rng.random_range(1..=n.min(12));
        let r = spherical_kmeans(&pts, k, seed, 100).unwrap();
        for w in r.objective_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "seed {seed}: {:?}", r.objective_history);
        }
    }
}

#[test]
fn kmeans_recovers_three_planted_directions() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (pts, truth) = planted_points(&mut rng, 3, 40, 8, 0.05);
        let r = spherical_kmeans(&pts, 3, seed, 100).unwrap();
        let mut map = HashMap::new();
        for (a, t) in r.assignments.iter().zip(&truth) {
            assert_eq!(*map.entry(*a).or_insert(*t), *t, "seed {seed}");
        }
        assert_eq!(map.len(), 3);
    }
}

fn arb_record(dim: usize) -> impl Strategy<Value = ProposalRecord> {
    (
        any::<u64>(),
        (-500i32..500, -500i32..500, 1u32..300, 1u32..300),
        0.0f32..=1.0,
        prop::collection::vec(-1e3f32..1e3, dim),
        any::<bool>(),
    )
        .prop_map(|(image_id, (x, y, w, h), objectness, feature, in_void)| ProposalRecord {
            image_id,
            bbox: BoundingBox::new(x, y, w, h).unwrap(),
            objectness,
            feature,
            in_void,
        })
}

proptest! {
    #[test]
    fn proposal_file_round_trip(records in prop::collection::vec(arb_record(5), 0..20)) {
        let mut bytes = Vec::new();
        write_proposals(&mut bytes, 5, &records).unwrap();
        let (dim, back) = read_proposals(&bytes).unwrap();
        prop_assert_eq!(dim, 5);
        prop_assert_eq!(back, records);
    }

    #[test]
    fn nms_survivors_pairwise_disjoint(boxes in prop::collection::vec((0i32..50, 0i32..50, 1u32..20, 1u32..20, 0.0f32..1.0), 1..100)) {
        let recs: Vec<ProposalRecord> = boxes.iter().map(|&(x, y, w, h, s)| ProposalRecord {
            image_id: 1, bbox: BoundingBox::new(x, y, w, h).unwrap(), objectness: s, feature: vec![1.0], in_void: true,
        }).collect();
        let kept = dedup_nms(&recs, 1e-7);
        prop_assert!(!kept.is_empty());
        for (i, a) in kept.iter().enumerate() {
            for b in &kept[i + 1..] {
                prop_assert!(openset_panoptic::types::box_iou(&a.bbox, &b.bbox) <= 1e-7);
            }
        }
    }
}
