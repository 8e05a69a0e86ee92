use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{SynthConfig, SynthError};
use crate::metrics::reference::reference_report;
use crate::metrics::MetricReport;
use crate::split::{DatasetManifest, ImageEntry, PanopticDataset};
use crate::types::{Category, CategoryKind, CategoryStatus, CategoryTable, PanopticMap, VOID_ID};

const THINGS: [&str; 19] = [
    "person", "bicycle", "car", "boat", "stop sign", "cat", "dog", "cow", "zebra", "bear", "tie",
    "banana", "pizza", "cake", "dining table", "toilet", "keyboard", "sink", "chair",
];
const STUFF: [&str; 4] = ["sky", "grass", "wall", "road"];

/// Things get ids 1.., stuff follows. Names in `unknown_names` are marked unknown.
pub fn synthetic_categories(unknown_names: &[String]) -> Result<CategoryTable, SynthError> {
    for n in unknown_names {
        if !THINGS.contains(&n.as_str()) {
            return Err(SynthError::Config(format!("unknown class {n:?} is not a synthetic thing")));
        }
    }
    let mut cats = vec![Category::void(VOID_ID)];
    for (i, name) in THINGS.iter().enumerate() {
        let status = if unknown_names.iter().any(|n| n == name) {
            CategoryStatus::Unknown
        } else {
            CategoryStatus::Known
        };
        let mut c = Category::new(i as u32 + 1, *name, CategoryKind::Thing, status);
        c.color = Some([(37 * i) as u8, (91 * i + 40) as u8, (153 * i + 80) as u8]);
        cats.push(c);
    }
    for (i, name) in STUFF.iter().enumerate() {
        let mut c = Category::new((THINGS.len() + i) as u32 + 1, *name, CategoryKind::Stuff, CategoryStatus::Known);
        c.color = Some([200, (60 * i) as u8, 30]);
        cats.push(c);
    }
    CategoryTable::new(cats).map_err(|e| SynthError::Config(e.to_string()))
}

#[derive(Debug, Clone)]
pub struct SyntheticPanoptic {
    pub categories: CategoryTable,
    pub gt: PanopticDataset,
    pub pred: PanopticDataset,
    /// Report of `pred` against `gt` from the brute-force matcher.
    pub expected: MetricReport,
}

fn random_rect(rng: &mut ChaCha8Rng, w: u32, h: u32) -> (u32, u32, u32, u32) {
    let rw = rng.random_range(2..=(w / 2).max(2));
    let rh = rng.random_range(2..=(h / 2).max(2));
    let x = rng.random_range(0..=w - rw);
    let y = rng.random_range(0..=h - rh);
    (x, y, x + rw, y + rh)
}

fn fill(pixels: &mut [u32], w: u32, (x0, y0, x1, y1): (u32, u32, u32, u32), id: u32) {
    for y in y0..y1 {
        for x in x0..x1 {
            pixels[(y * w + x) as usize] = id;
        }
    }
}

fn gt_image(rng: &mut ChaCha8Rng, cfg: &SynthConfig, things: &[u32], stuff: &[u32]) -> PanopticMap {
    let (w, h) = (cfg.image_width, cfg.image_height);
    let mut pixels = vec![VOID_ID; (w * h) as usize];
    let mut labels: BTreeMap<u32, (u32, bool)> = BTreeMap::new();
    let mut next = 1u32;

    let bands = rng.random_range(1..=3.min(stuff.len()));
    let mut cats: Vec<u32> = stuff.to_vec();
    cats.shuffle(rng);
    let mut cuts: Vec<u32> = (0..bands - 1).map(|_| rng.random_range(1..h)).collect();
    cuts.push(0);
    cuts.push(h);
    cuts.sort_unstable();
    for (b, win) in cuts.windows(2).enumerate() {
        fill(&mut pixels, w, (0, win[0], w, win[1]), next);
        labels.insert(next, (cats[b], false));
        next += 1;
    }
    for _ in 0..rng.random_range(0..=cfg.max_things_per_image) {
        let cat = *things.choose(rng).expect("thing categories");
        let crowd = rng.random_bool(cfg.crowd_prob);
        fill(&mut pixels, w, random_rect(rng, w, h), next);
        labels.insert(next, (cat, crowd));
        next += 1;
    }
    if rng.random_bool(cfg.void_prob) {
        fill(&mut pixels, w, random_rect(rng, w, h), VOID_ID);
    }
    PanopticMap::from_pixels(w, h, pixels, &labels)
}

fn perturb(
    rng: &mut ChaCha8Rng,
    cfg: &SynthConfig,
    gt: &PanopticMap,
    cats: &CategoryTable,
    things: &[u32],
) -> PanopticMap {
    let (w, h) = (gt.width, gt.height);
    let mut order: Vec<u32> = gt.segments.keys().copied().collect();
    order.shuffle(rng);
    // pred ids are unrelated to gt ids
    let new_id: BTreeMap<u32, u32> = order.iter().enumerate().map(|(i, &g)| (g, 100 + 3 * i as u32)).collect();
    let mut labels: BTreeMap<u32, (u32, bool)> = BTreeMap::new();
    let mut keep: BTreeMap<u32, bool> = BTreeMap::new();
    let mut erode: BTreeMap<u32, bool> = BTreeMap::new();
    for (&g, info) in &gt.segments {
        let dropped = rng.random_bool(cfg.drop_prob);
        keep.insert(g, !dropped);
        erode.insert(g, rng.random_bool(cfg.erode_prob));
        let mut cat = info.category_id;
        if rng.random_bool(cfg.flip_prob) {
            let kind = cats.get(cat).map(|c| c.kind);
            let pool: Vec<u32> = cats
                .iter()
                .filter(|c| c.status != CategoryStatus::Void && Some(c.kind) == kind && c.id != cat)
                .map(|c| c.id)
                .collect();
            if let Some(&c) = pool.choose(rng) {
                cat = c;
            }
        }
        labels.insert(new_id[&g], (cat, false));
    }
    let at = |x: i64, y: i64| -> Option<u32> {
        (x >= 0 && y >= 0 && x < w as i64 && y < h as i64).then(|| gt.pixels[(y * w as i64 + x) as usize])
    };
    let mut pixels = vec![VOID_ID; gt.pixel_count()];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let g = at(x, y).unwrap();
            if g == VOID_ID || !keep[&g] {
                continue;
            }
            let boundary = [(-1, 0), (1, 0), (0, -1), (0, 1)]
                .iter()
                .any(|&(dx, dy)| at(x + dx, y + dy).is_some_and(|n| n != g));
            if !(erode[&g] && boundary) {
                pixels[(y * w as i64 + x) as usize] = new_id[&g];
            }
        }
    }
    if rng.random_bool(cfg.spurious_prob) {
        let id = 1;
        let cat = *things.choose(rng).expect("thing categories");
        fill(&mut pixels, w, random_rect(rng, w, h), id);
        labels.insert(id, (cat, false));
    }
    PanopticMap::from_pixels(w, h, pixels, &labels)
}

fn dataset(maps: Vec<PanopticMap>, cats: &CategoryTable, name: &str) -> PanopticDataset {
    let images = maps
        .iter()
        .enumerate()
        .map(|(i, m)| ImageEntry {
            image_id: i as u64 + 1,
            width: m.width,
            height: m.height,
            file_name: format!("{:012}.jpg", i + 1),
            annotation_file: format!("{:012}.png", i + 1),
        })
        .collect();
    PanopticDataset {
        manifest: DatasetManifest {
            images,
            categories: cats.clone(),
            split_name: name.to_string(),
        },
        maps,
    }
}

/// Ground-truth maps, perturbed predictions and the expected report.
pub fn generate_synthetic_panoptic(cfg: &SynthConfig) -> Result<SyntheticPanoptic, SynthError> {
    cfg.validate()?;
    let categories = synthetic_categories(&cfg.unknown_names)?;
    let things: Vec<u32> = categories.iter().filter(|c| c.kind == CategoryKind::Thing && c.status != CategoryStatus::Void).map(|c| c.id).collect();
    let stuff: Vec<u32> = categories.known_stuff().map(|c| c.id).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut gts = Vec::with_capacity(cfg.n_images);
    let mut preds = Vec::with_capacity(cfg.n_images);
    for _ in 0..cfg.n_images {
        let gt = gt_image(&mut rng, cfg, &things, &stuff);
        preds.push(perturb(&mut rng, cfg, &gt, &categories, &things));
        gts.push(gt);
    }
    let expected = reference_report(gts.iter().zip(&preds), &categories);
    Ok(SyntheticPanoptic {
        gt: dataset(gts, &categories, "synthetic"),
        pred: dataset(preds, &categories, "synthetic-pred"),
        categories,
        expected,
    })
}
