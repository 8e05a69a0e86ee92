use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{EvalClass, MatchResult};
use crate::types::CategoryTable;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub iou_sum: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub pq: f64,
    pub sq: f64,
    pub rq: f64,
}

impl ClassMetrics {
    pub fn is_populated(&self) -> bool {
        self.tp + self.fp + self.fn_ > 0
    }

    fn finish(&mut self) {
        self.sq = if self.tp > 0 {
            self.iou_sum / self.tp as f64
        } else {
            0.0
        };
        let denom = self.tp as f64 + 0.5 * self.fp as f64 + 0.5 * self.fn_ as f64;
        self.rq = if denom > 0.0 {
            self.tp as f64 / denom
        } else {
            0.0
        };
        self.pq = self.sq * self.rq;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Group {
    #[serde(rename = "All-Known")]
    AllKnown,
    #[serde(rename = "Known-Th")]
    KnownThing,
    #[serde(rename = "Known-St")]
    KnownStuff,
    #[serde(rename = "Unknown")]
    Unknown,
}

impl Group {
    pub const ALL: [Group; 4] = [Group::AllKnown, Group::KnownThing, Group::KnownStuff, Group::Unknown];

    pub fn label(&self) -> &'static str {
        match self {
            Group::AllKnown => "All-Known",
            Group::KnownThing => "Known-Th",
            Group::KnownStuff => "Known-St",
            Group::Unknown => "Unknown",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub pq: f64,
    pub sq: f64,
    pub rq: f64,
    /// Number of populated categories averaged.
    pub n: usize,
}

/// Per-class and per-group panoptic quality. Groups without any populated
/// class are absent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub per_category: BTreeMap<EvalClass, ClassMetrics>,
    pub groups: BTreeMap<Group, GroupMetrics>,
}

fn groups_of(class: EvalClass, cats: &CategoryTable) -> &'static [Group] {
    match class {
        EvalClass::Unknown => &[Group::Unknown],
        EvalClass::Category(id) => match cats.get(id) {
            Some(c) if c.is_known_thing() => &[Group::AllKnown, Group::KnownThing],
            Some(c) if c.is_known_stuff() => &[Group::AllKnown, Group::KnownStuff],
            _ => &[],
        },
    }
}

/// Sums per-image results in the given order and derives PQ/SQ/RQ.
pub fn aggregate<'a>(
    results: impl IntoIterator<Item = &'a MatchResult>,
    cats: &CategoryTable,
) -> MetricReport {
    let mut per_category: BTreeMap<EvalClass, ClassMetrics> = BTreeMap::new();
    for r in results {
        for m in &r.matches {
            let e = per_category.entry(m.class).or_default();
            e.tp += 1;
            e.iou_sum += m.iou;
        }
        for s in &r.unmatched_gt {
            per_category.entry(s.class).or_default().fn_ += 1;
        }
        for s in &r.unmatched_pred {
            per_category.entry(s.class).or_default().fp += 1;
        }
    }
    per_category.retain(|_, m| m.is_populated());
    per_category.values_mut().for_each(ClassMetrics::finish);

    let mut sums: BTreeMap<Group, (f64, f64, f64, usize)> = BTreeMap::new();
    for (&class, m) in &per_category {
        for &g in groups_of(class, cats) {
            let e = sums.entry(g).or_default();
            e.0 += m.pq;
            e.1 += m.sq;
            e.2 += m.rq;
            e.3 += 1;
        }
    }
    let groups = sums
        .into_iter()
        .map(|(g, (pq, sq, rq, n))| {
            let n_f = n as f64;
            (
                g,
                GroupMetrics {
                    pq: pq / n_f,
                    sq: sq / n_f,
                    rq: rq / n_f,
                    n,
                },
            )
        })
        .collect();
    MetricReport {
        per_category,
        groups,
    }
}

fn pct(v: f64) -> String {
    format!("{:.1}", 100.0 * v)
}

impl MetricReport {
    /// Plain-text rendering: one line per group, then one per class.
    /// Values are percentages with one decimal.
    pub fn to_text(&self, cats: &CategoryTable) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<10} {:>6} {:>6} {:>6} {:>4}", "group", "PQ", "SQ", "RQ", "n");
        for g in Group::ALL {
            match self.groups.get(&g) {
                Some(m) => {
                    let _ = writeln!(
                        out,
                        "{:<10} {:>6} {:>6} {:>6} {:>4}",
                        g.label(),
                        pct(m.pq),
                        pct(m.sq),
                        pct(m.rq),
                        m.n
                    );
                }
                None => {
                    let _ = writeln!(out, "{:<10} {:>6} {:>6} {:>6} {:>4}", g.label(), "-", "-", "-", 0);
                }
            }
        }
        out.push('\n');
        let _ = writeln!(
            out,
            "{:<8} {:<20} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6}",
            "class", "name", "PQ", "SQ", "RQ", "TP", "FP", "FN"
        );
        for (class, m) in &self.per_category {
            let name = match class {
                EvalClass::Unknown => "unknown".to_string(),
                EvalClass::Category(id) => cats.get(*id).map_or_else(|| "?".into(), |c| c.name.clone()),
            };
            let _ = writeln!(
                out,
                "{:<8} {:<20} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6}",
                class.to_string(),
                name,
                pct(m.pq),
                pct(m.sq),
                pct(m.rq),
                m.tp,
                m.fp,
                m.fn_
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
