use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{expand_split, DatasetManifest, PanopticDataset, SplitError};
use crate::types::{CategoryKind, CategoryStatus, PanopticMap, SplitSpec, VOID_ID};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitRole {
    /// Removed classes are erased to void.
    Train,
    /// Removed classes stay annotated and become unknown ground truth.
    Eval,
}

impl std::str::FromStr for SplitRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Self::Train),
            "eval" => Ok(Self::Eval),
            _ => Err(format!("role must be train or eval, got {s:?}")),
        }
    }
}

fn erase(map: &PanopticMap, removed: &HashSet<u32>) -> PanopticMap {
    let dropped: HashSet<u32> = map
        .segments
        .iter()
        .filter(|(_, s)| removed.contains(&s.category_id))
        .map(|(&id, _)| id)
        .collect();
    if dropped.is_empty() {
        return map.clone();
    }
    PanopticMap {
        width: map.width,
        height: map.height,
        pixels: map
            .pixels
            .iter()
            .map(|p| if dropped.contains(p) { VOID_ID } else { *p })
            .collect(),
        segments: map
            .segments
            .iter()
            .filter(|(id, _)| !dropped.contains(id))
            .map(|(&id, &s)| (id, s))
            .collect(),
    }
}

/// Turns the classes named by `spec` (expanded through its bases) into
/// unknowns. `library` supplies extra split definitions for base lookup.
pub fn build_open_set_split(
    src: &PanopticDataset,
    spec: &SplitSpec,
    library: &[SplitSpec],
    role: SplitRole,
) -> Result<PanopticDataset, SplitError> {
    let cats = &src.manifest.categories;
    let names = expand_split(spec, library)?;
    let mut ids = Vec::with_capacity(names.len());
    for name in &names {
        let bad = |reason| SplitError::BadSplitClass {
            split: spec.name.clone(),
            class: name.clone(),
            reason,
        };
        let c = cats.by_name(name).ok_or_else(|| bad("is not in the dataset"))?;
        if c.kind != CategoryKind::Thing || c.status == CategoryStatus::Void {
            return Err(bad("is not a thing class"));
        }
        ids.push(c.id);
    }
    let categories = cats.with_status(&ids, CategoryStatus::Unknown)?;
    let maps = match role {
        SplitRole::Eval => src.maps.clone(),
        SplitRole::Train => {
            let removed: HashSet<u32> = ids.iter().copied().collect();
            src.maps.par_iter().map(|m| erase(m, &removed)).collect()
        }
    };
    Ok(PanopticDataset {
        manifest: DatasetManifest {
            images: src.manifest.images.clone(),
            categories,
            split_name: spec.name.clone(),
        },
        maps,
    })
}
