//! COCO panoptic JSON + PNG reading and writing.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::png_codec::{decode_id_png, encode_id_png};
use super::SplitError;
use crate::types::{
    Category, CategoryKind, CategoryStatus, CategoryTable, PanopticMap, SegmentInfo, VOID_ID,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub image_id: u64,
    pub width: u32,
    pub height: u32,
    /// Source photo name (unused here, carried through).
    pub file_name: String,
    /// PNG holding the segment ids, relative to the PNG directory.
    pub annotation_file: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub images: Vec<ImageEntry>,
    pub categories: CategoryTable,
    pub split_name: String,
}

/// A manifest together with one map per image, in manifest order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PanopticDataset {
    pub manifest: DatasetManifest,
    pub maps: Vec<PanopticMap>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CocoFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    info: Option<CocoInfo>,
    images: Vec<CocoImage>,
    annotations: Vec<CocoAnnotation>,
    categories: Vec<CocoCategory>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct CocoInfo {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CocoImage {
    id: u64,
    width: u32,
    height: u32,
    file_name: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CocoAnnotation {
    image_id: u64,
    file_name: String,
    segments_info: Vec<CocoSegment>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CocoSegment {
    id: u32,
    category_id: u32,
    #[serde(default)]
    iscrowd: u8,
    area: u64,
    #[serde(default)]
    bbox: [u32; 4],
}

#[derive(Debug, Serialize, Deserialize)]
struct CocoCategory {
    id: u32,
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    supercategory: Option<String>,
    isthing: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    color: Option<[u8; 3]>,
    /// Open-set status; absent means known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    status: Option<CategoryStatus>,
}

/// Parsed JSON side of a COCO panoptic dataset; maps are decoded on demand.
#[derive(Debug, Clone)]
pub struct CocoIndex {
    pub manifest: DatasetManifest,
    segments: Vec<Vec<CocoSegment>>,
}

fn categories_from(raw: Vec<CocoCategory>) -> Result<CategoryTable, SplitError> {
    let mut entries = Vec::with_capacity(raw.len() + 1);
    let mut has_void = false;
    for c in raw {
        let status = c.status.unwrap_or(CategoryStatus::Known);
        if status == CategoryStatus::Void {
            has_void = true;
        } else if c.id == VOID_ID {
            return Err(SplitError::Schema("category id 0 is reserved for void".into()));
        }
        let kind = if c.isthing != 0 {
            CategoryKind::Thing
        } else {
            CategoryKind::Stuff
        };
        entries.push(Category {
            id: c.id,
            name: c.name,
            kind,
            status,
            supercategory: c.supercategory,
            color: c.color,
        });
    }
    if !has_void {
        entries.push(Category::void(VOID_ID));
    }
    Ok(CategoryTable::new(entries)?)
}

/// Parses COCO panoptic JSON text.
pub fn parse_coco_json(text: &str) -> Result<CocoIndex, SplitError> {
    let file: CocoFile = serde_json::from_str(text)?;
    let categories = categories_from(file.categories)?;
    let mut by_image: HashMap<u64, CocoAnnotation> = HashMap::new();
    for a in file.annotations {
        let id = a.image_id;
        if by_image.insert(id, a).is_some() {
            return Err(SplitError::Schema(format!("duplicate annotation for image {id}")));
        }
    }
    let mut seen = HashSet::new();
    let mut images = Vec::with_capacity(file.images.len());
    let mut segments = Vec::with_capacity(file.images.len());
    for img in file.images {
        if !seen.insert(img.id) {
            return Err(SplitError::Schema(format!("duplicate image id {}", img.id)));
        }
        let ann = by_image
            .remove(&img.id)
            .ok_or_else(|| SplitError::Schema(format!("image {} has no annotation", img.id)))?;
        let mut ids = HashSet::new();
        for s in &ann.segments_info {
            if s.id == VOID_ID {
                return Err(SplitError::Schema(format!(
                    "image {}: segment id 0 is reserved",
                    img.id
                )));
            }
            if !ids.insert(s.id) {
                return Err(SplitError::DuplicateSegment {
                    image_id: img.id,
                    segment_id: s.id,
                });
            }
            if categories.get(s.category_id).is_none() {
                return Err(SplitError::UnknownCategory {
                    image_id: img.id,
                    category_id: s.category_id,
                });
            }
        }
        images.push(ImageEntry {
            image_id: img.id,
            width: img.width,
            height: img.height,
            file_name: img.file_name,
            annotation_file: ann.file_name,
        });
        segments.push(ann.segments_info);
    }
    if let Some(id) = by_image.keys().min() {
        return Err(SplitError::Schema(format!("annotation for unlisted image {id}")));
    }
    let split_name = file.info.and_then(|i| i.split).unwrap_or_default();
    Ok(CocoIndex {
        manifest: DatasetManifest {
            images,
            categories,
            split_name,
        },
        segments,
    })
}

impl CocoIndex {
    pub fn read(json_path: &Path) -> Result<Self, SplitError> {
        let text = fs::read_to_string(json_path).map_err(|e| SplitError::io(json_path, e))?;
        parse_coco_json(&text)
    }

    pub fn len(&self) -> usize {
        self.manifest.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.images.is_empty()
    }

    pub fn position(&self, image_id: u64) -> Option<usize> {
        self.manifest.images.iter().position(|i| i.image_id == image_id)
    }

    /// Builds the map of image `idx` from already-read PNG bytes.
    pub fn map_from_png(&self, idx: usize, png: &[u8]) -> Result<PanopticMap, SplitError> {
        let entry = &self.manifest.images[idx];
        let (w, h, pixels) = decode_id_png(png)?;
        if (w, h) != (entry.width, entry.height) {
            return Err(SplitError::Schema(format!(
                "image {}: PNG is {w}x{h}, JSON says {}x{}",
                entry.image_id, entry.width, entry.height
            )));
        }
        let labels: BTreeMap<u32, (u32, bool)> = self.segments[idx]
            .iter()
            .map(|s| (s.id, (s.category_id, s.iscrowd != 0)))
            .collect();
        let map = PanopticMap::from_pixels(w, h, pixels, &labels);
        let counts = crate::types::map::pixel_counts(&map.pixels);
        if let Some((&id, _)) = counts
            .iter()
            .filter(|(id, _)| **id != VOID_ID && !labels.contains_key(id))
            .min_by_key(|(id, _)| **id)
        {
            return Err(SplitError::OrphanSegment {
                image_id: entry.image_id,
                segment_id: id,
            });
        }
        for s in &self.segments[idx] {
            let actual = map.segments.get(&s.id).map_or(0, |i| i.area);
            if actual == 0 {
                return Err(SplitError::Schema(format!(
                    "image {}: segment {} listed but absent from PNG",
                    entry.image_id, s.id
                )));
            }
            if actual != s.area {
                return Err(SplitError::Schema(format!(
                    "image {}: segment {} area {} but PNG has {actual} pixels",
                    entry.image_id, s.id, s.area
                )));
            }
        }
        Ok(map)
    }

    pub fn load_map(&self, idx: usize, png_dir: &Path) -> Result<PanopticMap, SplitError> {
        let path = png_dir.join(&self.manifest.images[idx].annotation_file);
        let bytes = fs::read(&path).map_err(|e| SplitError::io(&path, e))?;
        self.map_from_png(idx, &bytes)
    }
}

/// Reads a COCO panoptic JSON file and every referenced PNG.
pub fn load_coco_panoptic(json_path: &Path, png_dir: &Path) -> Result<PanopticDataset, SplitError> {
    let index = CocoIndex::read(json_path)?;
    let maps = (0..index.len())
        .map(|i| index.load_map(i, png_dir))
        .collect::<Result<_, _>>()?;
    Ok(PanopticDataset {
        manifest: index.manifest,
        maps,
    })
}

/// Serializes the JSON document; PNGs are written separately.
pub fn coco_json(dataset: &PanopticDataset) -> Result<String, SplitError> {
    let m = &dataset.manifest;
    if m.images.len() != dataset.maps.len() {
        return Err(SplitError::Schema(format!(
            "{} images but {} maps",
            m.images.len(),
            dataset.maps.len()
        )));
    }
    let categories = m
        .categories
        .iter()
        .filter(|c| !(c.status == CategoryStatus::Void && c.id == VOID_ID))
        .map(|c| CocoCategory {
            id: c.id,
            name: c.name.clone(),
            supercategory: c.supercategory.clone(),
            isthing: u8::from(c.kind == CategoryKind::Thing),
            color: c.color,
            status: (c.status != CategoryStatus::Known).then_some(c.status),
        })
        .collect();
    let mut images = Vec::with_capacity(m.images.len());
    let mut annotations = Vec::with_capacity(m.images.len());
    for (entry, map) in m.images.iter().zip(&dataset.maps) {
        images.push(CocoImage {
            id: entry.image_id,
            width: entry.width,
            height: entry.height,
            file_name: entry.file_name.clone(),
        });
        annotations.push(CocoAnnotation {
            image_id: entry.image_id,
            file_name: entry.annotation_file.clone(),
            segments_info: segments_info(map),
        });
    }
    let file = CocoFile {
        info: Some(CocoInfo {
            split: (!m.split_name.is_empty()).then(|| m.split_name.clone()),
        }),
        images,
        annotations,
        categories,
    };
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    Ok(text)
}

fn segments_info(map: &PanopticMap) -> Vec<CocoSegment> {
    let w = map.width as usize;
    let mut boxes: BTreeMap<u32, [u32; 4]> = BTreeMap::new();
    for (i, &id) in map.pixels.iter().enumerate() {
        if id == VOID_ID {
            continue;
        }
        let (x, y) = ((i % w) as u32, (i / w) as u32);
        let b = boxes.entry(id).or_insert([x, y, x, y]);
        b[0] = b[0].min(x);
        b[1] = b[1].min(y);
        b[2] = b[2].max(x);
        b[3] = b[3].max(y);
    }
    map.segments
        .iter()
        .map(|(&id, &SegmentInfo { category_id, iscrowd, area })| {
            let [x0, y0, x1, y1] = boxes.get(&id).copied().unwrap_or([0, 0, 0, 0]);
            CocoSegment {
                id,
                category_id,
                iscrowd: u8::from(iscrowd),
                area,
                bbox: [x0, y0, x1 + 1 - x0, y1 + 1 - y0],
            }
        })
        .collect()
}

/// Writes the JSON document and one PNG per image into `png_dir`.
pub fn save_coco_panoptic(
    dataset: &PanopticDataset,
    json_path: &Path,
    png_dir: &Path,
) -> Result<(), SplitError> {
    let text = coco_json(dataset)?;
    fs::create_dir_all(png_dir).map_err(|e| SplitError::io(png_dir, e))?;
    for (entry, map) in dataset.manifest.images.iter().zip(&dataset.maps) {
        let bytes = encode_id_png(map.width, map.height, &map.pixels)?;
        let path = png_dir.join(&entry.annotation_file);
        fs::write(&path, bytes).map_err(|e| SplitError::io(&path, e))?;
    }
    if let Some(parent) = json_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| SplitError::io(parent, e))?;
    }
    fs::write(json_path, text).map_err(|e| SplitError::io(json_path, e))
}

/// The PNG directory paired with a JSON file by COCO convention:
/// `panoptic_val2017.json` → `panoptic_val2017/`.
pub fn default_png_dir(json_path: &Path) -> std::path::PathBuf {
    json_path.with_extension("")
}
