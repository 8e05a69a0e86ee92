use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CategoryKind {
    Thing,
    Stuff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CategoryStatus {
    Known,
    Unknown,
    Void,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub id: u32,
    pub name: String,
    pub kind: CategoryKind,
    pub status: CategoryStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supercategory: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<[u8; 3]>,
}

impl Category {
    pub fn new(id: u32, name: impl Into<String>, kind: CategoryKind, status: CategoryStatus) -> Self {
        Self {
            id,
            name: name.into(),
            kind,
            status,
            supercategory: None,
            color: None,
        }
    }

    pub fn void(id: u32) -> Self {
        Self::new(id, "void", CategoryKind::Stuff, CategoryStatus::Void)
    }

    pub fn is_known_thing(&self) -> bool {
        self.status == CategoryStatus::Known && self.kind == CategoryKind::Thing
    }

    pub fn is_known_stuff(&self) -> bool {
        self.status == CategoryStatus::Known && self.kind == CategoryKind::Stuff
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CategoryError {
    #[error("duplicate category id {0}")]
    DuplicateId(u32),
    #[error("expected exactly one void category, found {0}")]
    VoidCount(usize),
    #[error("unknown category {id} ({name}) must be a thing class")]
    UnknownStuff { id: u32, name: String },
}

/// Validated set of categories with exactly one void entry.
///
/// Entries are kept sorted by id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryTable {
    entries: Vec<Category>,
    index: HashMap<u32, usize>,
}

impl CategoryTable {
    pub fn new(mut entries: Vec<Category>) -> Result<Self, CategoryError> {
        entries.sort_by_key(|c| c.id);
        let mut index = HashMap::with_capacity(entries.len());
        for (i, c) in entries.iter().enumerate() {
            if index.insert(c.id, i).is_some() {
                return Err(CategoryError::DuplicateId(c.id));
            }
            if c.status == CategoryStatus::Unknown && c.kind != CategoryKind::Thing {
                return Err(CategoryError::UnknownStuff {
                    id: c.id,
                    name: c.name.clone(),
                });
            }
        }
        let voids = entries
            .iter()
            .filter(|c| c.status == CategoryStatus::Void)
            .count();
        if voids != 1 {
            return Err(CategoryError::VoidCount(voids));
        }
        Ok(Self { entries, index })
    }

    pub fn get(&self, id: u32) -> Option<&Category> {
        self.index.get(&id).map(|&i| &self.entries[i])
    }

    pub fn by_name(&self, name: &str) -> Option<&Category> {
        self.entries.iter().find(|c| c.name == name)
    }

    pub fn entries(&self) -> &[Category] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = &Category> {
        self.entries.iter()
    }

    pub fn void_category(&self) -> &Category {
        self.entries
            .iter()
            .find(|c| c.status == CategoryStatus::Void)
            .expect("table invariant: one void entry")
    }

    pub fn known_things(&self) -> impl Iterator<Item = &Category> {
        self.entries.iter().filter(|c| c.is_known_thing())
    }

    pub fn known_stuff(&self) -> impl Iterator<Item = &Category> {
        self.entries.iter().filter(|c| c.is_known_stuff())
    }

    pub fn unknowns(&self) -> impl Iterator<Item = &Category> {
        self.entries
            .iter()
            .filter(|c| c.status == CategoryStatus::Unknown)
    }

    /// Returns a copy with the given ids switched to `status`; the result is
    /// re-validated.
    pub fn with_status(&self, ids: &[u32], status: CategoryStatus) -> Result<Self, CategoryError> {
        let entries = self
            .entries
            .iter()
            .cloned()
            .map(|mut c| {
                if ids.contains(&c.id) {
                    c.status = status;
                }
                c
            })
            .collect();
        Self::new(entries)
    }
}
