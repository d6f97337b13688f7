use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::SpecDocument;
use crate::fielddata::DataTable;
use crate::json::SpecNode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompositeType {
    None,
    Layered,
    Trellis,
    MultipleViews,
}

impl CompositeType {
    pub fn name(self) -> &'static str {
        match self {
            CompositeType::None => "none",
            CompositeType::Layered => "layered",
            CompositeType::Trellis => "trellis",
            CompositeType::MultipleViews => "multiple_views",
        }
    }
}

/// A view or plot count; trellis counts depend on the backing data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewCount {
    Exact(usize),
    DataDependent,
}

impl ViewCount {
    fn mul(self, other: ViewCount) -> ViewCount {
        match (self, other) {
            (ViewCount::Exact(a), ViewCount::Exact(b)) => ViewCount::Exact(a * b),
            _ => ViewCount::DataDependent,
        }
    }

    fn add(self, other: ViewCount) -> ViewCount {
        match (self, other) {
            (ViewCount::Exact(a), ViewCount::Exact(b)) => ViewCount::Exact(a + b),
            _ => ViewCount::DataDependent,
        }
    }

    pub fn exact(self) -> Option<usize> {
        match self {
            ViewCount::Exact(n) => Some(n),
            ViewCount::DataDependent => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewComposition {
    pub is_composite: bool,
    pub composite_type: CompositeType,
    pub view_count: ViewCount,
    pub leaf_plot_count: ViewCount,
}

const CONCAT_KEYS: [&str; 3] = ["concat", "hconcat", "vconcat"];
const FACET_CHANNELS: [&str; 3] = ["facet", "row", "column"];

/// Classifies the composition of `doc`. When several operators appear the
/// type is picked by priority multiple_views > trellis > layered.
pub fn detect_composition(doc: &SpecDocument, data: Option<&DataTable>) -> ViewComposition {
    let mut found = BTreeSet::new();
    collect_operators(&doc.root, &mut found);
    let composite_type = found.iter().next_back().copied().unwrap_or(CompositeType::None);
    let (view_count, leaf_plot_count) = if composite_type == CompositeType::None {
        (ViewCount::Exact(1), ViewCount::Exact(1))
    } else {
        (top_level_views(&doc.root, data), leaf_count(&doc.root, data))
    };
    ViewComposition {
        is_composite: composite_type != CompositeType::None,
        composite_type,
        view_count,
        leaf_plot_count,
    }
}

fn collect_operators(root: &SpecNode, found: &mut BTreeSet<CompositeType>) {
    super::for_each_view(root, &mut |view| {
        if view.get("layer").and_then(SpecNode::as_array).is_some() {
            found.insert(CompositeType::Layered);
        }
        if CONCAT_KEYS
            .iter()
            .any(|k| view.get(k).and_then(SpecNode::as_array).is_some())
        {
            found.insert(CompositeType::MultipleViews);
        }
        if is_trellis_operator(view) || !facet_channel_fields(view).is_empty() {
            found.insert(CompositeType::Trellis);
        }
    });
}

/// Field names used by `row`/`column`/`facet` encoding channels of a unit view.
fn facet_channel_fields(view: &SpecNode) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(enc) = view.get("encoding") {
        for ch in FACET_CHANNELS {
            if let Some(field) = enc.get(ch).and_then(|d| d.get("field")).and_then(SpecNode::as_str) {
                out.push(field.into());
            }
        }
    }
    out
}

fn unique_count(data: Option<&DataTable>, field: &str) -> ViewCount {
    match data.and_then(|t| t.unique_values(field)) {
        Some(values) => ViewCount::Exact(values.len().max(1)),
        None => ViewCount::DataDependent,
    }
}

/// Number of cells produced by a facet or repeat operator on `view`.
fn operator_cells(view: &SpecNode, data: Option<&DataTable>) -> ViewCount {
    if let Some(rep) = view.get("repeat") {
        return match rep {
            SpecNode::Array(items) => ViewCount::Exact(items.len().max(1)),
            SpecNode::Object(entries) => entries
                .iter()
                .filter_map(|(_, v)| v.as_array())
                .fold(ViewCount::Exact(1), |acc, a| acc.mul(ViewCount::Exact(a.len().max(1)))),
            _ => ViewCount::Exact(1),
        };
    }
    if let Some(facet) = view.get("facet") {
        if let Some(field) = facet.get("field").and_then(SpecNode::as_str) {
            return unique_count(data, field);
        }
        let mut cells = ViewCount::Exact(1);
        for ch in ["row", "column"] {
            if let Some(field) = facet.get(ch).and_then(|d| d.get("field")).and_then(SpecNode::as_str) {
                cells = cells.mul(unique_count(data, field));
            }
        }
        return cells;
    }
    facet_channel_fields(view)
        .iter()
        .fold(ViewCount::Exact(1), |acc, f| acc.mul(unique_count(data, f)))
}

fn is_trellis_operator(view: &SpecNode) -> bool {
    view.get("repeat").is_some()
        || (view.get("facet").is_some() && view.get("spec").is_some())
}

fn top_level_views(root: &SpecNode, data: Option<&DataTable>) -> ViewCount {
    for k in CONCAT_KEYS {
        if let Some(items) = root.get(k).and_then(SpecNode::as_array) {
            return ViewCount::Exact(items.len());
        }
    }
    if is_trellis_operator(root) || !facet_channel_fields(root).is_empty() {
        return operator_cells(root, data);
    }
    ViewCount::Exact(1)
}

fn leaf_count(view: &SpecNode, data: Option<&DataTable>) -> ViewCount {
    for k in CONCAT_KEYS {
        if let Some(items) = view.get(k).and_then(SpecNode::as_array) {
            return items
                .iter()
                .fold(ViewCount::Exact(0), |acc, c| acc.add(leaf_count(c, data)));
        }
    }
    if let Some(items) = view.get("layer").and_then(SpecNode::as_array) {
        let inner = items
            .iter()
            .fold(ViewCount::Exact(0), |acc, c| acc.add(leaf_count(c, data)));
        // A layer with facet channels on the shared encoding is repeated per cell.
        return if facet_channel_fields(view).is_empty() {
            inner
        } else {
            inner.mul(operator_cells(view, data))
        };
    }
    if is_trellis_operator(view) {
        let inner = view
            .get("spec")
            .map(|s| leaf_count(s, data))
            .unwrap_or(ViewCount::Exact(1));
        return operator_cells(view, data).mul(inner);
    }
    operator_cells(view, data)
}
