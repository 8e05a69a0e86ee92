use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::SplitError;
use crate::types::SplitSpec;

const COCO_SPLITS: &str = include_str!("../../presets/coco_splits.json");

/// A document of split definitions; later entries may extend earlier ones.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitList {
    pub splits: Vec<SplitSpec>,
}

pub fn parse_split_list(text: &str) -> Result<SplitList, SplitError> {
    Ok(serde_json::from_str(text)?)
}

/// The published COCO splits: "5%", "10%" and "20%".
pub fn preset_specs() -> Vec<SplitSpec> {
    parse_split_list(COCO_SPLITS)
        .expect("bundled split presets parse")
        .splits
}

/// Looks up a preset; accepts "5", "5%", etc.
pub fn preset(name: &str) -> Option<SplitSpec> {
    let key = format!("{}%", name.trim_end_matches('%'));
    preset_specs().into_iter().find(|s| s.name == key)
}

/// Resolves `spec` and its base chain into the full ordered class list.
/// Bases are looked up in `library` first, then among the presets.
pub fn expand_split(spec: &SplitSpec, library: &[SplitSpec]) -> Result<Vec<String>, SplitError> {
    let presets = preset_specs();
    let mut by_name: HashMap<&str, &SplitSpec> = presets.iter().map(|s| (s.name.as_str(), s)).collect();
    for s in library {
        by_name.insert(s.name.as_str(), s);
    }
    let mut chain = vec![spec];
    let mut visited = HashSet::from([spec.name.as_str()]);
    let mut cur = spec;
    while let Some(base) = &cur.cumulative_base {
        let next = by_name
            .get(base.as_str())
            .ok_or_else(|| SplitError::BadSplitBase(spec.name.clone()))?;
        if !visited.insert(next.name.as_str()) {
            return Err(SplitError::BadSplitBase(spec.name.clone()));
        }
        chain.push(next);
        cur = next;
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for s in chain.iter().rev() {
        for name in &s.unknown_class_names {
            if !seen.insert(name.clone()) {
                return Err(SplitError::BadSplitClass {
                    split: spec.name.clone(),
                    class: name.clone(),
                    reason: "is listed twice",
                });
            }
            out.push(name.clone());
        }
    }
    Ok(out)
}
