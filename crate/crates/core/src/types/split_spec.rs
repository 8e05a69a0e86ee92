use serde::{Deserialize, Serialize};

/// Named list of thing classes to turn into unknowns, optionally extending
/// another split (cumulative removal).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub name: String,
    pub unknown_class_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cumulative_base: Option<String>,
}
