use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::SpecDocument;
use crate::json::SpecNode;

/// Keys whose subtrees hold embedded datasets. They are pruned before any
/// structural measurement.
pub const EMBEDDED_DATA_KEYS: [&str; 2] = ["values", "datasets"];

const EMBEDDED_VOCABULARY: &str = include_str!("../../resources/vl5_properties.txt");

/// Property-name vocabulary used to filter key counts.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    names: Vec<&'static str>,
}

impl Vocabulary {
    /// The bundled Vega-Lite v5 property list.
    pub fn embedded() -> Vocabulary {
        let mut names: Vec<&'static str> = EMBEDDED_VOCABULARY
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect();
        names.sort_unstable();
        names.dedup();
        Vocabulary { names }
    }

    pub fn contains(&self, key: &str) -> bool {
        self.names.binary_search(&key).is_ok()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralProfile {
    pub key_count: usize,
    pub max_depth: usize,
    pub branching_factor: f64,
    pub unique_keys: BTreeSet<String>,
    pub excluded_key_count: usize,
    /// Children summed over internal nodes (numerator of `branching_factor`).
    pub child_total: usize,
    /// Number of non-empty containers (denominator of `branching_factor`).
    pub internal_nodes: usize,
}

/// Counts keys, depth and branching over `doc`, with embedded-data subtrees
/// pruned. Passing a vocabulary drops keys it does not contain from the key
/// count (their subtrees are still walked).
pub fn structural_profile(doc: &SpecDocument, vocabulary: Option<&Vocabulary>) -> StructuralProfile {
    let mut acc = Walk {
        vocabulary,
        key_count: 0,
        excluded: 0,
        unique: BTreeSet::new(),
        child_total: 0,
        internal: 0,
    };
    let max_depth = acc.visit(&doc.root);
    let branching_factor = if acc.internal == 0 {
        0.0
    } else {
        acc.child_total as f64 / acc.internal as f64
    };
    StructuralProfile {
        key_count: acc.key_count,
        max_depth,
        branching_factor,
        unique_keys: acc.unique,
        excluded_key_count: acc.excluded,
        child_total: acc.child_total,
        internal_nodes: acc.internal,
    }
}

struct Walk<'v> {
    vocabulary: Option<&'v Vocabulary>,
    key_count: usize,
    excluded: usize,
    unique: BTreeSet<String>,
    child_total: usize,
    internal: usize,
}

impl Walk<'_> {
    /// Returns the container depth of `node` (0 for scalars).
    fn visit(&mut self, node: &SpecNode) -> usize {
        match node {
            SpecNode::Scalar(_) => 0,
            SpecNode::Array(items) => {
                if !items.is_empty() {
                    self.internal += 1;
                    self.child_total += items.len();
                }
                1 + items.iter().map(|c| self.visit(c)).max().unwrap_or(0)
            }
            SpecNode::Object(entries) => {
                let mut children = 0;
                let mut deepest = 0;
                for (key, child) in entries {
                    if EMBEDDED_DATA_KEYS.contains(&key.as_str()) {
                        continue;
                    }
                    children += 1;
                    match self.vocabulary {
                        Some(v) if !v.contains(key) => self.excluded += 1,
                        _ => {
                            self.key_count += 1;
                            if !self.unique.contains(key.as_str()) {
                                self.unique.insert(key.clone());
                            }
                        }
                    }
                    deepest = deepest.max(self.visit(child));
                }
                if children > 0 {
                    self.internal += 1;
                    self.child_total += children;
                }
                1 + deepest
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ComplexityLevel {
    Simple,
    Medium,
    Complex,
    ExtraComplex,
}

impl ComplexityLevel {
    pub const ALL: [ComplexityLevel; 4] = [
        ComplexityLevel::Simple,
        ComplexityLevel::Medium,
        ComplexityLevel::Complex,
        ComplexityLevel::ExtraComplex,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ComplexityLevel::Simple => "simple",
            ComplexityLevel::Medium => "medium",
            ComplexityLevel::Complex => "complex",
            ComplexityLevel::ExtraComplex => "extra_complex",
        }
    }
}

/// Quartile thresholds of key counts: ≤16 simple, ≤24 medium, ≤41 complex.
pub fn classify_complexity(profile: &StructuralProfile) -> ComplexityLevel {
    level_for_key_count(profile.key_count)
}

pub(crate) fn level_for_key_count(keys: usize) -> ComplexityLevel {
    match keys {
        0..=16 => ComplexityLevel::Simple,
        17..=24 => ComplexityLevel::Medium,
        25..=41 => ComplexityLevel::Complex,
        _ => ComplexityLevel::ExtraComplex,
    }
}
