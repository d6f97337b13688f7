use alloc::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::SpecDocument;
use crate::json::SpecNode;

/// Ten-category chart taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ChartType {
    Area,
    Bar,
    Circle,
    Diagram,
    Distribution,
    GridMatrix,
    Line,
    Map,
    Point,
    TreesNetworks,
}

impl ChartType {
    pub const ALL: [ChartType; 10] = [
        ChartType::Area,
        ChartType::Bar,
        ChartType::Circle,
        ChartType::Diagram,
        ChartType::Distribution,
        ChartType::GridMatrix,
        ChartType::Line,
        ChartType::Map,
        ChartType::Point,
        ChartType::TreesNetworks,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChartTypeSet {
    pub types: BTreeSet<ChartType>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("specification {0:?} has no view declaring a mark")]
pub struct NoMarkError(pub alloc::string::String);

/// Per-leaf outcome: a chart category, or an annotation mark (rule, text,
/// image) that only decides the type when nothing else is drawn.
enum LeafClass {
    Chart(ChartType),
    Annotation,
}

fn mark_type(view: &SpecNode) -> Option<&str> {
    let mark = view.get("mark")?;
    mark.as_str().or_else(|| mark.get("type").and_then(SpecNode::as_str))
}

/// Looks up a channel on the leaf, falling back to the shared layer encoding.
fn channel<'a>(leaf: &'a SpecNode, layer: Option<&'a SpecNode>, name: &str) -> Option<&'a SpecNode> {
    leaf.get("encoding")
        .and_then(|e| e.get(name))
        .or_else(|| layer.and_then(|l| l.get("encoding")).and_then(|e| e.get(name)))
}

fn is_binned(def: &SpecNode) -> bool {
    def.get("bin").is_some_and(|b| !b.is_falsy())
}

fn is_discrete(def: &SpecNode) -> bool {
    matches!(
        def.get("type").and_then(SpecNode::as_str),
        Some("nominal" | "ordinal")
    ) || is_binned(def)
        || def.get("timeUnit").is_some()
}

fn counts_aggregate(def: &SpecNode) -> bool {
    def.get("aggregate").and_then(SpecNode::as_str) == Some("count")
}

fn classify_leaf(
    root: &SpecNode,
    leaf: &SpecNode,
    layer: Option<&SpecNode>,
    mark: &str,
) -> LeafClass {
    if mark == "geoshape" || leaf.get("projection").is_some() || root.get("projection").is_some() {
        return LeafClass::Chart(ChartType::Map);
    }
    let x = channel(leaf, layer, "x");
    let y = channel(leaf, layer, "y");
    let positional = [x, y];
    match mark {
        "bar" => LeafClass::Chart(ChartType::Bar),
        "line" | "trail" => LeafClass::Chart(ChartType::Line),
        "area" => LeafClass::Chart(ChartType::Area),
        "arc" => LeafClass::Chart(ChartType::Circle),
        "boxplot" | "errorbar" | "errorband" => LeafClass::Chart(ChartType::Distribution),
        "point" | "circle" | "square" | "tick" => {
            let distribution = positional
                .iter()
                .flatten()
                .any(|d| is_binned(d) || counts_aggregate(d));
            LeafClass::Chart(if distribution {
                ChartType::Distribution
            } else {
                ChartType::Point
            })
        }
        "rect" => match (x, y) {
            (Some(x), Some(y)) if is_discrete(x) && is_discrete(y) => {
                LeafClass::Chart(ChartType::GridMatrix)
            }
            _ => LeafClass::Chart(ChartType::Bar),
        },
        "rule" => {
            let edge = ["x", "y", "x2", "y2"]
                .iter()
                .all(|c| channel(leaf, layer, c).is_some());
            let has_nodes = layer
                .and_then(|l| l.get("layer"))
                .and_then(SpecNode::as_array)
                .is_some_and(|sibs| {
                    sibs.iter()
                        .any(|s| matches!(mark_type(s), Some("point" | "circle" | "square")))
                });
            if edge && has_nodes {
                LeafClass::Chart(ChartType::TreesNetworks)
            } else {
                LeafClass::Annotation
            }
        }
        "text" | "image" => LeafClass::Annotation,
        _ => LeafClass::Chart(ChartType::Diagram),
    }
}

/// Union of leaf-view chart categories. Annotation-only specs (text, image,
/// rule without a node-link layout) fall into `Diagram`.
pub fn classify_chart_types(doc: &SpecDocument) -> Result<ChartTypeSet, NoMarkError> {
    let mut types = BTreeSet::new();
    let mut saw_mark = false;
    super::for_each_leaf(&doc.root, None, &mut |leaf, layer| {
        if let Some(mark) = mark_type(leaf) {
            saw_mark = true;
            if let LeafClass::Chart(t) = classify_leaf(&doc.root, leaf, layer, mark) {
                types.insert(t);
            }
        }
    });
    if !saw_mark {
        return Err(NoMarkError(doc.id.clone()));
    }
    if types.is_empty() {
        types.insert(ChartType::Diagram);
    }
    Ok(ChartTypeSet { types })
}
