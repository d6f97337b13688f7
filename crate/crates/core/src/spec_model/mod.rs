//! Parsed Vega-Lite specifications and the per-spec structural facts derived
//! from them.

mod chart_type;
mod composition;
mod interaction;
mod profile;

pub use chart_type::{classify_chart_types, ChartType, ChartTypeSet, NoMarkError};
pub use composition::{detect_composition, CompositeType, ViewComposition, ViewCount};
pub use interaction::{detect_interactions, InteractionKind, InteractionProfile};
pub use profile::{
    classify_complexity, structural_profile, ComplexityLevel, StructuralProfile, Vocabulary,
    EMBEDDED_DATA_KEYS,
};

use alloc::string::String;

use crate::json::{self, JsonError, SpecNode};

/// Parse failure for a specification file.
pub type ParseError = JsonError;

/// A parsed specification. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecDocument {
    pub id: String,
    pub source_text: String,
    pub root: SpecNode,
    /// Major version from the `$schema` URL, when one is present and recognised.
    pub schema_version: Option<u8>,
}

/// Parses `source_text` into a document. The root must be a JSON object.
pub fn parse_spec(source_text: &str, id: &str) -> Result<SpecDocument, ParseError> {
    let root = json::parse(source_text)?;
    if !matches!(root, SpecNode::Object(_)) {
        return Err(JsonError::Parse {
            position: 0,
            message: "specification root must be an object".into(),
        });
    }
    let schema_version = root
        .get("$schema")
        .and_then(SpecNode::as_str)
        .and_then(schema_version_from_url);
    Ok(SpecDocument {
        id: id.into(),
        source_text: source_text.into(),
        root,
        schema_version,
    })
}

impl SpecDocument {
    /// Builds a document from an already-parsed tree (used after rewrites).
    pub fn from_root(id: &str, root: SpecNode) -> SpecDocument {
        let schema_version = root
            .get("$schema")
            .and_then(SpecNode::as_str)
            .and_then(schema_version_from_url);
        SpecDocument {
            id: id.into(),
            source_text: root.to_compact(),
            root,
            schema_version,
        }
    }
}

/// Extracts `N` from `.../vega-lite/vN.json` or `.../vega-lite/vN.M.K.json`.
pub fn schema_version_from_url(url: &str) -> Option<u8> {
    let idx = url.find("vega-lite/v")?;
    let rest = &url[idx + "vega-lite/v".len()..];
    let digits: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
    let v: u8 = digits.parse().ok()?;
    (2..=5).contains(&v).then_some(v)
}

/// Iterates over the view-level objects of a spec: the root plus every spec
/// nested under `layer`, `concat`, `hconcat`, `vconcat` and the inner `spec`
/// of facet/repeat operators.
pub(crate) fn for_each_view<'a>(node: &'a SpecNode, f: &mut dyn FnMut(&'a SpecNode)) {
    if node.as_object().is_none() {
        return;
    }
    f(node);
    for key in ["layer", "concat", "hconcat", "vconcat"] {
        if let Some(items) = node.get(key).and_then(SpecNode::as_array) {
            for child in items {
                for_each_view(child, f);
            }
        }
    }
    if let Some(inner) = node.get("spec") {
        for_each_view(inner, f);
    }
}

/// Calls `f` on every leaf view (a view with no composition operator).
/// The second argument is the enclosing view holding a `layer` array, if any.
pub(crate) fn for_each_leaf<'a>(
    node: &'a SpecNode,
    parent_layer: Option<&'a SpecNode>,
    f: &mut dyn FnMut(&'a SpecNode, Option<&'a SpecNode>),
) {
    if node.as_object().is_none() {
        return;
    }
    let mut composite = false;
    if let Some(items) = node.get("layer").and_then(SpecNode::as_array) {
        composite = true;
        for child in items {
            for_each_leaf(child, Some(node), f);
        }
    }
    for key in ["concat", "hconcat", "vconcat"] {
        if let Some(items) = node.get(key).and_then(SpecNode::as_array) {
            composite = true;
            for child in items {
                for_each_leaf(child, None, f);
            }
        }
    }
    if let Some(inner) = node.get("spec") {
        composite = true;
        for_each_leaf(inner, None, f);
    }
    if !composite {
        f(node, parent_layer);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_spec_parses() {
        let doc = parse_spec(r#"{"mark":"bar"}"#, "a").unwrap();
        assert_eq!(doc.root.as_object().unwrap().len(), 1);
        assert_eq!(doc.schema_version, None);
    }

    #[test]
    fn unclosed_spec_is_a_parse_error() {
        assert!(matches!(
            parse_spec(r#"{"mark":"bar""#, "a"),
            Err(JsonError::Parse { .. })
        ));
    }

    #[test]
    fn schema_version_read_from_url() {
        let doc = parse_spec(
            r#"{"$schema":"https://vega.github.io/schema/vega-lite/v5.json","mark":"line"}"#,
            "a",
        )
        .unwrap();
        assert_eq!(doc.schema_version, Some(5));
        assert_eq!(
            schema_version_from_url("https://vega.github.io/schema/vega-lite/v4.17.0.json"),
            Some(4)
        );
        assert_eq!(schema_version_from_url("https://vega.github.io/schema/vega/v5.json"), None);
    }

    #[test]
    fn non_object_root_rejected() {
        assert!(parse_spec("[1,2]", "a").is_err());
    }

    #[test]
    fn duplicate_key_error_surfaces() {
        assert!(matches!(
            parse_spec(r#"{"mark":"bar","mark":"line"}"#, "a"),
            Err(JsonError::DuplicateKey { .. })
        ));
    }
}
