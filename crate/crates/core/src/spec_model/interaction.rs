use alloc::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::SpecDocument;
use crate::json::SpecNode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionKind {
    Tooltip,
    Selection,
    Bind,
    PanZoom,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionProfile {
    pub has_interaction: bool,
    pub kinds: BTreeSet<InteractionKind>,
}

/// Keyword scan for interactive features anywhere in the spec.
pub fn detect_interactions(doc: &SpecDocument) -> InteractionProfile {
    let mut kinds = BTreeSet::new();
    scan(&doc.root, &mut kinds);
    InteractionProfile {
        has_interaction: !kinds.is_empty(),
        kinds,
    }
}

fn scan(node: &SpecNode, kinds: &mut BTreeSet<InteractionKind>) {
    match node {
        SpecNode::Scalar(_) => {}
        SpecNode::Array(items) => items.iter().for_each(|c| scan(c, kinds)),
        SpecNode::Object(entries) => {
            for (key, child) in entries {
                match key.as_str() {
                    // Embedded rows may carry arbitrary column names.
                    "values" | "datasets" => continue,
                    "tooltip" if !child.is_falsy() => {
                        kinds.insert(InteractionKind::Tooltip);
                    }
                    "selection" if child.as_object().is_some_and(|e| !e.is_empty()) => {
                        kinds.insert(InteractionKind::Selection);
                    }
                    "params" => {
                        if let Some(items) = child.as_array() {
                            if items.iter().any(|p| p.get("select").is_some()) {
                                kinds.insert(InteractionKind::Selection);
                            }
                        }
                    }
                    "bind" => {
                        if child.as_str() == Some("scales") {
                            kinds.insert(InteractionKind::PanZoom);
                        } else if !child.is_falsy() {
                            kinds.insert(InteractionKind::Bind);
                        }
                    }
                    "href" if !child.is_falsy() => {
                        kinds.insert(InteractionKind::Other);
                    }
                    _ => {}
                }
                scan(child, kinds);
            }
        }
    }
}
