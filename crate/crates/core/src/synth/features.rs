use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{SynthConfig, SynthError, MAX_RETRIES};
use crate::engine::{PseudoLabel, ProposalRecord};
use crate::types::BoundingBox;

/// Generator ground truth for one record. `class` is `None` for distractors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthLabel {
    pub image_id: u64,
    pub bbox: BoundingBox,
    pub class: Option<u32>,
}

#[derive(Debug, Clone)]
pub struct SyntheticFeatures {
    pub feature_dim: usize,
    pub records: Vec<ProposalRecord>,
    /// Parallel to `records`.
    pub truth: Vec<TruthLabel>,
    /// Unit centroid per planted class.
    pub centroids: Vec<Vec<f64>>,
}

fn gaussian_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn angle(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b).clamp(-1.0, 1.0).acos()
}

fn draw_range(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f32 {
    let v = if hi > lo { rng.random_range(lo..hi) } else { lo };
    (v as f32).clamp(0.0, 1.0)
}

/// Planted classes are Gaussian clouds around random centroids, projected to
/// the sphere. Each point stays within half the intra-class angle of its
/// centroid, and centroids are separated by the inter-class angle plus the
/// intra-class angle, so both distance bounds hold for every pair.
pub fn generate_synthetic_features(cfg: &SynthConfig) -> Result<SyntheticFeatures, SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let dim = cfg.feature_dim;
    let intra_angle = (1.0 - cfg.intra_class_cos_dist_max).acos();
    let inter_angle = (1.0 - cfg.inter_class_cos_dist_min).acos();
    let min_centroid_angle = inter_angle + intra_angle;

    let n_planted = if cfg.distractor_fraction < 1.0 { cfg.n_planted_classes } else { 0 };
    let mut centroids = Vec::new();
    let mut attempts = 0;
    'draw: loop {
        if attempts == MAX_RETRIES {
            return Err(SynthError::Infeasible(MAX_RETRIES));
        }
        attempts += 1;
        centroids.clear();
        for _ in 0..n_planted {
            let c = gaussian_unit(&mut rng, dim);
            if centroids.iter().any(|o: &Vec<f64>| angle(o, &c) <= min_centroid_angle) {
                continue 'draw;
            }
            centroids.push(c);
        }
        break;
    }

    let sigma = (cfg.planted_spread / dim as f64).sqrt();
    let mut points: Vec<(Vec<f64>, f32, Option<u32>)> = Vec::new();
    for (class, c) in centroids.iter().enumerate() {
        for _ in 0..cfg.points_per_class {
            let mut tries = 0;
            let p = loop {
                if tries == MAX_RETRIES {
                    return Err(SynthError::Infeasible(MAX_RETRIES));
                }
                tries += 1;
                let mut v: Vec<f64> = c.iter().map(|x| x + sigma * rng.sample::<f64, _>(StandardNormal)).collect();
                let norm = dot(&v, &v).sqrt();
                v.iter_mut().for_each(|x| *x /= norm);
                if angle(&v, c) < intra_angle / 2.0 {
                    break v;
                }
            };
            let obj = draw_range(&mut rng, cfg.planted_objectness);
            points.push((p, obj, Some(class as u32)));
        }
    }
    let planted_total = cfg.n_planted_classes * cfg.points_per_class;
    let n_distractors = if cfg.distractor_fraction < 1.0 {
        (planted_total as f64 * cfg.distractor_fraction / (1.0 - cfg.distractor_fraction)).round() as usize
    } else {
        planted_total
    };
    for _ in 0..n_distractors {
        let p = gaussian_unit(&mut rng, dim);
        let obj = draw_range(&mut rng, cfg.distractor_objectness);
        points.push((p, obj, None));
    }
    points.shuffle(&mut rng);

    let cols = (cfg.boxes_per_image as f64).sqrt().ceil() as usize;
    let pitch = cfg.box_size as i32 + 8;
    let mut records = Vec::with_capacity(points.len());
    let mut truth = Vec::with_capacity(points.len());
    for (i, (p, objectness, class)) in points.into_iter().enumerate() {
        let image_id = (i / cfg.boxes_per_image) as u64 + 1;
        let slot = i % cfg.boxes_per_image;
        let bbox = BoundingBox::new(
            (slot % cols) as i32 * pitch,
            (slot / cols) as i32 * pitch,
            cfg.box_size,
            cfg.box_size,
        )
        .expect("positive box size");
        records.push(ProposalRecord {
            image_id,
            bbox,
            objectness,
            feature: p.iter().map(|&x| x as f32).collect(),
            in_void: true,
        });
        truth.push(TruthLabel { image_id, bbox, class });
    }
    Ok(SyntheticFeatures {
        feature_dim: dim,
        records,
        truth,
        centroids,
    })
}

#[derive(Serialize, Deserialize)]
struct TruthRow {
    image_id: u64,
    x: i32,
    y: i32,
    w: u32,
    h: u32,
    class: String,
}

/// CSV `image_id,x,y,w,h,class` where class is a planted index or `distractor`.
pub fn write_truth(w: impl Write, truth: &[TruthLabel]) -> Result<(), SynthError> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(["image_id", "x", "y", "w", "h", "class"]).map_err(|e| SynthError::Truth(e.to_string()))?;
    for t in truth {
        out.serialize(TruthRow {
            image_id: t.image_id,
            x: t.bbox.x,
            y: t.bbox.y,
            w: t.bbox.w,
            h: t.bbox.h,
            class: t.class.map_or_else(|| "distractor".to_string(), |c| c.to_string()),
        })
        .map_err(|e| SynthError::Truth(e.to_string()))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_truth(r: impl Read) -> Result<Vec<TruthLabel>, SynthError> {
    let mut out = Vec::new();
    for row in csv::Reader::from_reader(r).deserialize::<TruthRow>() {
        let row = row.map_err(|e| SynthError::Truth(e.to_string()))?;
        let class = match row.class.as_str() {
            "distractor" => None,
            s => Some(s.parse().map_err(|_| SynthError::Truth(format!("bad class {s:?}")))?),
        };
        let bbox = BoundingBox::new(row.x, row.y, row.w, row.h)
            .ok_or_else(|| SynthError::Truth(format!("empty box in image {}", row.image_id)))?;
        out.push(TruthLabel { image_id: row.image_id, bbox, class });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassScore {
    pub class_id: u32,
    pub exemplars: usize,
    /// Most common planted class among the exemplars, if any are planted.
    pub majority: Option<u32>,
    /// Share of exemplars carrying the majority planted class.
    pub purity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscoveryScore {
    pub classes: Vec<ClassScore>,
    /// Planted classes that are the majority of at least one class with purity ≥ the bar.
    pub recovered: Vec<u32>,
    pub planted: usize,
    pub distractors_accepted: usize,
    pub distractors_total: usize,
    pub unmatched_labels: usize,
}

impl DiscoveryScore {
    pub fn distractor_acceptance(&self) -> f64 {
        if self.distractors_total == 0 {
            0.0
        } else {
            self.distractors_accepted as f64 / self.distractors_total as f64
        }
    }
}

/// Scores pseudo-labels against generator truth, matching on image id and box.
pub fn score_discovery(labels: &[PseudoLabel], truth: &[TruthLabel], purity_bar: f64) -> DiscoveryScore {
    let index: HashMap<(u64, i32, i32, u32, u32), Option<u32>> = truth
        .iter()
        .map(|t| ((t.image_id, t.bbox.x, t.bbox.y, t.bbox.w, t.bbox.h), t.class))
        .collect();
    let mut per_class: BTreeMap<u32, BTreeMap<Option<u32>, usize>> = BTreeMap::new();
    let mut unmatched_labels = 0;
    for l in labels {
        match index.get(&(l.image_id, l.x, l.y, l.w, l.h)) {
            Some(&class) => *per_class.entry(l.class_id).or_default().entry(class).or_default() += 1,
            None => unmatched_labels += 1,
        }
    }
    let mut classes = Vec::new();
    let mut recovered = std::collections::BTreeSet::new();
    let mut distractors_accepted = 0;
    for (&class_id, counts) in &per_class {
        let total: usize = counts.values().sum();
        distractors_accepted += counts.get(&None).copied().unwrap_or(0);
        let best = counts
            .iter()
            .filter_map(|(k, &n)| k.map(|k| (n, std::cmp::Reverse(k))))
            .max();
        let (majority, purity) = match best {
            Some((n, std::cmp::Reverse(k))) => (Some(k), n as f64 / total as f64),
            None => (None, 0.0),
        };
        if let Some(k) = majority {
            if purity >= purity_bar {
                recovered.insert(k);
            }
        }
        classes.push(ClassScore { class_id, exemplars: total, majority, purity });
    }
    let planted = truth.iter().filter_map(|t| t.class).collect::<std::collections::BTreeSet<_>>().len();
    DiscoveryScore {
        classes,
        recovered: recovered.into_iter().collect(),
        planted,
        distractors_accepted,
        distractors_total: truth.iter().filter(|t| t.class.is_none()).count(),
        unmatched_labels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            n_planted_classes: 3,
            points_per_class: 40,
            feature_dim: 32,
            ..Default::default()
        }
    }

    #[test]
    fn counts_and_layout() {
        let out = generate_synthetic_features(&small()).unwrap();
        assert_eq!(out.records.len(), 120 + 80);
        assert_eq!(out.truth.iter().filter(|t| t.class.is_none()).count(), 80);
        let first: Vec<_> = out.records.iter().filter(|r| r.image_id == 1).collect();
        assert_eq!(first.len(), 20);
        for (i, a) in first.iter().enumerate() {
            assert!(a.bbox.area() >= 1024);
            for b in &first[i + 1..] {
                assert_eq!(a.bbox.intersection_area(&b.bbox), 0);
            }
        }
    }

    #[test]
    fn all_distractors() {
        let cfg = SynthConfig { distractor_fraction: 1.0, ..small() };
        let out = generate_synthetic_features(&cfg).unwrap();
        assert!(out.truth.iter().all(|t| t.class.is_none()));
        assert!(out.centroids.is_empty());
    }

    #[test]
    fn infeasible_separation_errors() {
        // 2-d circle cannot hold 8 classes separated by ~90 degrees
        let cfg = SynthConfig {
            feature_dim: 2,
            inter_class_cos_dist_min: 0.9,
            ..small()
        };
        let cfg = SynthConfig { n_planted_classes: 8, ..cfg };
        assert!(matches!(generate_synthetic_features(&cfg), Err(SynthError::Infeasible(_))));
    }

    #[test]
    fn truth_round_trip() {
        let out = generate_synthetic_features(&small()).unwrap();
        let mut buf = Vec::new();
        write_truth(&mut buf, &out.truth).unwrap();
        assert_eq!(read_truth(buf.as_slice()).unwrap(), out.truth);
    }
}
