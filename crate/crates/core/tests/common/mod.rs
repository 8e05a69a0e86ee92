//! Shared test helpers: random map pairs and a set-based matching oracle.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};

use openset_panoptic::metrics::{EvalClass, MatchResult, MetricReport};
use openset_panoptic::types::{Category, CategoryKind, CategoryStatus, CategoryTable, PanopticMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn small_categories() -> CategoryTable {
    use CategoryKind::*;
    use CategoryStatus::*;
    CategoryTable::new(vec![
        Category::void(0),
        Category::new(1, "person", Thing, Known),
        Category::new(2, "dog", Thing, Known),
        Category::new(3, "grass", Stuff, Known),
        Category::new(4, "cow", Thing, Unknown),
        Category::new(5, "car", Thing, Unknown),
    ])
    .unwrap()
}

fn random_region(rng: &mut ChaCha8Rng, w: u32, h: u32) -> Vec<usize> {
    let n = (w * h) as usize;
    if rng.random_bool(0.7) {
        let x0 = rng.random_range(0..w);
        let y0 = rng.random_range(0..h);
        let x1 = rng.random_range(x0 + 1..=w);
        let y1 = rng.random_range(y0 + 1..=h);
        (y0..y1).flat_map(|y| (x0..x1).map(move |x| (y * w + x) as usize)).collect()
    } else {
        (0..n).filter(|_| rng.random_bool(0.3)).collect()
    }
}

/// A map with up to `max_segments` segments, void pixels and optional crowd.
pub fn random_map(rng: &mut ChaCha8Rng, w: u32, h: u32, max_segments: usize, crowd: bool) -> PanopticMap {
    let mut pixels = vec![0u32; (w * h) as usize];
    let mut labels = BTreeMap::new();
    let n = rng.random_range(0..=max_segments);
    for s in 0..n {
        let id = 10 + 7 * s as u32;
        let cat = rng.random_range(0..=5u32);
        let is_thing = matches!(cat, 1 | 2 | 4 | 5);
        let iscrowd = crowd && is_thing && rng.random_bool(0.2);
        for p in random_region(rng, w, h) {
            pixels[p] = id;
        }
        labels.insert(id, (cat, iscrowd));
    }
    PanopticMap::from_pixels(w, h, pixels, &labels)
}

/// A prediction loosely derived from `gt` so that matches occur, with noise,
/// relabeled ids, class swaps within the unknown pair, and extra segments.
pub fn noisy_prediction(rng: &mut ChaCha8Rng, gt: &PanopticMap, max_segments: usize) -> PanopticMap {
    if rng.random_bool(0.3) {
        return random_map(rng, gt.width, gt.height, max_segments, false);
    }
    let mut labels = BTreeMap::new();
    let mut remap = BTreeMap::new();
    for (i, (&g, info)) in gt.segments.iter().enumerate().take(max_segments) {
        let id = 200 + 3 * i as u32;
        remap.insert(g, id);
        let cat = match info.category_id {
            4 if rng.random_bool(0.5) => 5,
            _ if rng.random_bool(0.1) => rng.random_range(1..=5u32),
            c => c,
        };
        labels.insert(id, (cat, false));
    }
    let noise = rng.random_range(0.0..0.4);
    let pixels = gt
        .pixels
        .iter()
        .map(|g| {
            if rng.random_bool(noise) {
                let keys: Vec<u32> = labels.keys().copied().collect();
                if keys.is_empty() || rng.random_bool(0.3) { 0 } else { keys[rng.random_range(0..keys.len())] }
            } else {
                remap.get(g).copied().unwrap_or(0)
            }
        })
        .collect();
    PanopticMap::from_pixels(gt.width, gt.height, pixels, &labels)
}

pub fn random_pair(seed: u64) -> (PanopticMap, PanopticMap) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = rng.random_range(1..=16);
    let h = rng.random_range(1..=16);
    let gt = random_map(&mut rng, w, h, 6, true);
    let pred = noisy_prediction(&mut rng, &gt, 6);
    (gt, pred)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OracleOutcome {
    pub matches: BTreeMap<(u32, u32), f64>,
    pub unmatched_gt: BTreeSet<u32>,
    pub unmatched_pred: BTreeSet<u32>,
    pub ignored_pred: BTreeSet<u32>,
}

fn eval_class(cats: &CategoryTable, map: &PanopticMap, id: u32) -> Option<EvalClass> {
    let info = map.segments.get(&id)?;
    let cat = cats.get(info.category_id).expect("category exists");
    match cat.status {
        CategoryStatus::Void => None,
        CategoryStatus::Unknown => Some(EvalClass::Unknown),
        CategoryStatus::Known => Some(EvalClass::Category(cat.id)),
    }
}

fn pixel_sets(map: &PanopticMap) -> BTreeMap<u32, HashSet<usize>> {
    let mut out: BTreeMap<u32, HashSet<usize>> = BTreeMap::new();
    for (i, &p) in map.pixels.iter().enumerate() {
        out.entry(p).or_default().insert(i);
    }
    out
}

/// Matching written straight from the definitions with explicit pixel sets.
pub fn oracle_match(gt: &PanopticMap, pred: &PanopticMap, cats: &CategoryTable) -> OracleOutcome {
    let gsets = pixel_sets(gt);
    let psets = pixel_sets(pred);
    let gt_void: HashSet<usize> = (0..gt.pixels.len())
        .filter(|&i| eval_class(cats, gt, gt.pixels[i]).is_none())
        .collect();
    let mut out = OracleOutcome::default();
    let mut gt_hit = BTreeSet::new();
    let mut pred_hit = BTreeSet::new();
    for (&g, gs) in &gsets {
        let Some(gc) = eval_class(cats, gt, g) else { continue };
        if gt.segments[&g].iscrowd {
            continue;
        }
        for (&p, ps) in &psets {
            let Some(pc) = eval_class(cats, pred, p) else { continue };
            if gc != pc {
                continue;
            }
            let inter = gs.intersection(ps).count();
            let on_void = ps.intersection(&gt_void).count();
            let union = gs.len() + ps.len() - inter - on_void;
            let iou = inter as f64 / union as f64;
            if iou > 0.5 {
                out.matches.insert((g, p), iou);
                gt_hit.insert(g);
                pred_hit.insert(p);
            }
        }
    }
    for &g in gsets.keys() {
        if eval_class(cats, gt, g).is_some() && !gt_hit.contains(&g) && !gt.segments[&g].iscrowd {
            out.unmatched_gt.insert(g);
        }
    }
    for (&p, ps) in &psets {
        let Some(pc) = eval_class(cats, pred, p) else { continue };
        if pred_hit.contains(&p) {
            continue;
        }
        let covered = ps
            .iter()
            .filter(|&&i| {
                let g = gt.pixels[i];
                gt_void.contains(&i) || (gt.segments[&g].iscrowd && eval_class(cats, gt, g) == Some(pc))
            })
            .count();
        if covered as f64 / ps.len() as f64 > 0.5 {
            out.ignored_pred.insert(p);
        } else {
            out.unmatched_pred.insert(p);
        }
    }
    out
}

pub fn outcome_of(r: &MatchResult) -> OracleOutcome {
    OracleOutcome {
        matches: r.matches.iter().map(|m| ((m.gt_segment_id, m.pred_segment_id), m.iou)).collect(),
        unmatched_gt: r.unmatched_gt.iter().map(|s| s.segment_id).collect(),
        unmatched_pred: r.unmatched_pred.iter().map(|s| s.segment_id).collect(),
        ignored_pred: r.ignored_pred.iter().map(|s| s.segment_id).collect(),
    }
}

/// Compares two outcomes: identical sets, IoU within `tol`.
pub fn same_outcome(a: &OracleOutcome, b: &OracleOutcome, tol: f64) -> bool {
    a.unmatched_gt == b.unmatched_gt
        && a.unmatched_pred == b.unmatched_pred
        && a.ignored_pred == b.ignored_pred
        && a.matches.len() == b.matches.len()
        && a.matches.iter().zip(&b.matches).all(|((ka, va), (kb, vb))| ka == kb && (va - vb).abs() <= tol)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OracleClass {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub iou_sum: f64,
}

/// Per-class counts and the PQ/SQ/RQ group means from oracle outcomes.
pub fn oracle_report(
    pairs: &[(PanopticMap, PanopticMap)],
    cats: &CategoryTable,
) -> (BTreeMap<EvalClass, OracleClass>, BTreeMap<&'static str, (f64, f64, f64)>) {
    let mut per: BTreeMap<EvalClass, OracleClass> = BTreeMap::new();
    for (gt, pred) in pairs {
        let o = oracle_match(gt, pred, cats);
        for (&(g, _), &iou) in &o.matches {
            let e = per.entry(eval_class(cats, gt, g).unwrap()).or_default();
            e.tp += 1;
            e.iou_sum += iou;
        }
        for &g in &o.unmatched_gt {
            per.entry(eval_class(cats, gt, g).unwrap()).or_default().fn_ += 1;
        }
        for &p in &o.unmatched_pred {
            per.entry(eval_class(cats, pred, p).unwrap()).or_default().fp += 1;
        }
    }
    let metrics = |c: &OracleClass| {
        let sq = if c.tp > 0 { c.iou_sum / c.tp as f64 } else { 0.0 };
        let rq = c.tp as f64 / (c.tp as f64 + 0.5 * c.fp as f64 + 0.5 * c.fn_ as f64);
        (sq * rq, sq, rq)
    };
    let mut groups = BTreeMap::new();
    let kind_of = |ec: &EvalClass| match ec {
        EvalClass::Unknown => None,
        EvalClass::Category(id) => Some(cats.get(*id).unwrap().kind),
    };
    let sets: [(&'static str, Box<dyn Fn(&EvalClass) -> bool>); 4] = [
        ("All-Known", Box::new(|c| kind_of(c).is_some())),
        ("Known-Th", Box::new(|c| kind_of(c) == Some(CategoryKind::Thing))),
        ("Known-St", Box::new(|c| kind_of(c) == Some(CategoryKind::Stuff))),
        ("Unknown", Box::new(|c| kind_of(c).is_none())),
    ];
    for (name, pick) in sets {
        let members: Vec<(f64, f64, f64)> = per.iter().filter(|(c, m)| pick(c) && m.tp + m.fp + m.fn_ > 0).map(|(_, m)| metrics(m)).collect();
        if !members.is_empty() {
            let n = members.len() as f64;
            let sum = members.iter().fold((0.0, 0.0, 0.0), |a, m| (a.0 + m.0, a.1 + m.1, a.2 + m.2));
            groups.insert(name, (sum.0 / n, sum.1 / n, sum.2 / n));
        }
    }
    (per, groups)
}

/// Checks a library report against the oracle; returns a description of the first difference.
pub fn compare_report(report: &MetricReport, pairs: &[(PanopticMap, PanopticMap)], cats: &CategoryTable, tol: f64) -> Result<(), String> {
    let (per, groups) = oracle_report(pairs, cats);
    let populated: BTreeMap<_, _> = report.per_category.iter().filter(|(_, m)| m.tp + m.fp + m.fn_ > 0).collect();
    if populated.len() != per.iter().filter(|(_, m)| m.tp + m.fp + m.fn_ > 0).count() {
        return Err(format!("class sets differ: {:?} vs {:?}", populated.keys().collect::<Vec<_>>(), per.keys().collect::<Vec<_>>()));
    }
    for (class, o) in &per {
        if o.tp + o.fp + o.fn_ == 0 {
            continue;
        }
        let m = report.per_category.get(class).ok_or(format!("missing class {class}"))?;
        if (m.tp, m.fp, m.fn_) != (o.tp, o.fp, o.fn_) || (m.iou_sum - o.iou_sum).abs() > tol {
            return Err(format!("class {class}: {m:?} vs {o:?}"));
        }
    }
    if report.groups.len() != groups.len() {
        return Err(format!("group sets differ: {:?} vs {:?}", report.groups.keys().collect::<Vec<_>>(), groups.keys().collect::<Vec<_>>()));
    }
    for (g, m) in &report.groups {
        let &(pq, sq, rq) = groups.get(g.label()).ok_or(format!("extra group {}", g.label()))?;
        if (m.pq - pq).abs() > tol || (m.sq - sq).abs() > tol || (m.rq - rq).abs() > tol {
            return Err(format!("group {}: {m:?} vs {:?}", g.label(), (pq, sq, rq)));
        }
    }
    Ok(())
}

pub struct FusionCase {
    pub known: Vec<openset_panoptic::fusion::InstancePrediction>,
    pub unknown: Vec<openset_panoptic::fusion::InstancePrediction>,
    pub semantic: openset_panoptic::fusion::SemanticMap,
    pub cfg: openset_panoptic::fusion::FusionConfig,
}

/// Random instances and semantic grid over `small_categories`.
pub fn random_fusion_case(seed: u64) -> FusionCase {
    use openset_panoptic::fusion::{BinaryMask, FusionConfig, InstancePrediction, SemanticMap};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = rng.random_range(1..=40);
    let h = rng.random_range(1..=40);
    let instance = |rng: &mut ChaCha8Rng, cats: &[u32]| {
        let mut mask = BinaryMask::new(w, h);
        let region = random_region(rng, w, h);
        let region = if region.is_empty() { vec![0] } else { region };
        for p in region {
            mask.bits[p] = true;
        }
        InstancePrediction {
            mask,
            category_id: cats[rng.random_range(0..cats.len())],
            confidence: f64::from(rng.random_range(0..=10u32)) / 10.0,
        }
    };
    let known = (0..rng.random_range(0..8)).map(|_| instance(&mut rng, &[1, 2])).collect();
    let unknown = (0..rng.random_range(0..5)).map(|_| instance(&mut rng, &[4, 5])).collect();
    // semantic labels may name things or void; only known stuff counts
    let labels = (0..w * h).map(|_| [0, 3, 3, 3, 1][rng.random_range(0..5)]).collect();
    let cfg = FusionConfig {
        overlap_keep_fraction: rng.random_range(0.0..=1.0),
        stuff_area_min: rng.random_range(0..60),
        unknown_overwrite_stuff: rng.random_bool(0.3),
    };
    FusionCase { known, unknown, semantic: SemanticMap { width: w, height: h, labels }, cfg }
}
