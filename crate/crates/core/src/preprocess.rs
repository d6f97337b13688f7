//! Prompt preparation: move embedded datasets out to CSV tables, point the
//! spec at them, and minify.
//!
//! This module only computes the rewritten spec and the CSV contents; the
//! `chartnl` crate writes them to disk.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::json::{Scalar, SpecNode};
use crate::spec_model::SpecDocument;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataFile {
    /// File name relative to the output directory.
    pub file_name: String,
    pub row_count: usize,
    pub column_names: Vec<String>,
    #[serde(skip)]
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum PreprocessError {
    /// Embedded values that are not a list of row objects; left in place.
    #[error("embedded data at {path} is not a list of row objects")]
    HeterogeneousData { path: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalizedSpec {
    pub doc: SpecDocument,
    pub data_files: Vec<DataFile>,
    pub issues: Vec<PreprocessError>,
}

/// Single-line serialization in source order without whitespace.
pub fn minify_spec(doc: &SpecDocument) -> String {
    doc.root.to_compact()
}

fn csv_field(out: &mut String, cell: &str) {
    if cell.contains([',', '"', '\n', '\r']) {
        out.push('"');
        out.push_str(&cell.replace('"', "\"\""));
        out.push('"');
    } else {
        out.push_str(cell);
    }
}

/// RFC-4180 CSV, `\n` between records and no trailing newline.
pub fn render_csv(header: &[String], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    let line = |cells: &[String], out: &mut String| {
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            csv_field(out, c);
        }
    };
    line(header, &mut out);
    for r in rows {
        out.push('\n');
        line(r, &mut out);
    }
    out
}

fn cell_text(node: &SpecNode) -> String {
    match node {
        SpecNode::Scalar(s) => s.to_cell(),
        other => other.to_compact(),
    }
}

/// Converts a JSON array of row objects into CSV. Columns are the union of
/// row keys in first-seen order; missing cells are empty.
pub fn rows_to_table(values: &SpecNode) -> Option<(Vec<String>, Vec<Vec<String>>)> {
    let items = values.as_array()?;
    let mut header: Vec<String> = Vec::new();
    for item in items {
        for (k, _) in item.as_object()? {
            if !header.contains(k) {
                header.push(k.clone());
            }
        }
    }
    let rows = items
        .iter()
        .map(|item| {
            header
                .iter()
                .map(|h| item.get(h).map(cell_text).unwrap_or_default())
                .collect()
        })
        .collect();
    Some((header, rows))
}

struct Rewriter<'a> {
    spec_id: &'a str,
    url_prefix: &'a str,
    files: Vec<DataFile>,
    named: Vec<(String, String)>,
    issues: Vec<PreprocessError>,
}

impl Rewriter<'_> {
    fn emit(&mut self, values: &SpecNode) -> Option<String> {
        let (header, rows) = rows_to_table(values)?;
        let file_name = format!("{}_data_{}.csv", self.spec_id, self.files.len());
        self.files.push(DataFile {
            file_name: file_name.clone(),
            row_count: rows.len(),
            contents: render_csv(&header, &rows),
            column_names: header,
        });
        Some(format!("{}{}", self.url_prefix, file_name))
    }

    fn url_node(url: String) -> SpecNode {
        SpecNode::Object(alloc::vec![("url".to_string(), SpecNode::Scalar(Scalar::String(url)))])
    }

    fn rewrite_data(&mut self, data: &SpecNode, path: &str) -> SpecNode {
        if let Some(values) = data.get("values") {
            return match self.emit(values) {
                Some(url) => Self::url_node(url),
                None => {
                    self.issues.push(PreprocessError::HeterogeneousData {
                        path: format!("{}/values", path),
                    });
                    data.clone()
                }
            };
        }
        if let Some(name) = data.get("name").and_then(SpecNode::as_str) {
            if let Some((_, url)) = self.named.iter().find(|(n, _)| n == name) {
                return Self::url_node(url.clone());
            }
        }
        data.clone()
    }

    fn walk(&mut self, node: &SpecNode, path: &str) -> SpecNode {
        match node {
            SpecNode::Scalar(_) => node.clone(),
            SpecNode::Array(items) => SpecNode::Array(
                items
                    .iter()
                    .enumerate()
                    .map(|(i, c)| self.walk(c, &format!("{}/{}", path, i)))
                    .collect(),
            ),
            SpecNode::Object(entries) => SpecNode::Object(
                entries
                    .iter()
                    .filter_map(|(k, v)| {
                        let child_path = format!("{}/{}", path, k);
                        if k == "datasets" && path.is_empty() && v.as_object().is_some() {
                            // Emptied when every named dataset was externalized.
                            return self.leftover_datasets(v).map(|d| (k.clone(), d));
                        }
                        let new = if k == "data" && v.as_object().is_some() {
                            self.rewrite_data(v, &child_path)
                        } else {
                            self.walk(v, &child_path)
                        };
                        Some((k.clone(), new))
                    })
                    .collect(),
            ),
        }
    }

    fn leftover_datasets(&self, datasets: &SpecNode) -> Option<SpecNode> {
        if self.named.is_empty() {
            return Some(datasets.clone());
        }
        let kept: Vec<(String, SpecNode)> = datasets
            .as_object()?
            .iter()
            .filter(|(n, _)| !self.named.iter().any(|(m, _)| m == n))
            .cloned()
            .collect();
        (!kept.is_empty()).then_some(SpecNode::Object(kept))
    }
}

/// Moves every embedded `values` array and every top-level named dataset to
/// its own CSV table and rewrites the referencing `data` nodes to
/// `{"url": <prefix><spec_id>_data_<k>.csv}`.
pub fn externalize_data(doc: &SpecDocument, url_prefix: &str) -> ExternalizedSpec {
    let mut rw = Rewriter {
        spec_id: &doc.id,
        url_prefix,
        files: Vec::new(),
        named: Vec::new(),
        issues: Vec::new(),
    };
    if let Some(datasets) = doc.root.get("datasets").and_then(SpecNode::as_object) {
        for (name, rows) in datasets {
            match rw.emit(rows) {
                Some(url) => rw.named.push((name.clone(), url)),
                None => rw.issues.push(PreprocessError::HeterogeneousData {
                    path: format!("/datasets/{}", name),
                }),
            }
        }
    }
    let root = rw.walk(&doc.root, "");
    ExternalizedSpec {
        doc: SpecDocument::from_root(&doc.id, root),
        data_files: rw.files,
        issues: rw.issues,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec_model::parse_spec;

    #[test]
    fn embedded_rows_become_csv() {
        let doc = parse_spec(
            r#"{"data":{"values":[{"a":1,"b":2},{"a":3,"b":4}]},"mark":"bar"}"#,
            "s1",
        )
        .unwrap();
        let ext = externalize_data(&doc, "");
        assert_eq!(ext.data_files.len(), 1);
        assert_eq!(ext.data_files[0].file_name, "s1_data_0.csv");
        assert_eq!(ext.data_files[0].contents, "a,b\n1,2\n3,4");
        assert_eq!(ext.data_files[0].row_count, 2);
        assert_eq!(minify_spec(&ext.doc), r#"{"data":{"url":"s1_data_0.csv"},"mark":"bar"}"#);
        assert!(ext.issues.is_empty());
    }

    #[test]
    fn malformed_datasets_are_left_alone() {
        let doc = parse_spec(r#"{"datasets":null,"mark":"bar"}"#, "s").unwrap();
        let ext = externalize_data(&doc, "");
        assert_eq!(ext.doc.root, doc.root);
    }

    #[test]
    fn url_specs_pass_through() {
        let doc = parse_spec(r#"{"data":{"url":"data/cars.json"},"mark":"point"}"#, "s").unwrap();
        let ext = externalize_data(&doc, "");
        assert!(ext.data_files.is_empty());
        assert_eq!(ext.doc.root, doc.root);
    }

    #[test]
    fn union_of_keys() {
        let doc = parse_spec(r#"{"data":{"values":[{"a":1},{"b":2}]}}"#, "s").unwrap();
        let ext = externalize_data(&doc, "");
        assert_eq!(ext.data_files[0].contents, "a,b\n1,\n,2");
    }

    #[test]
    fn quoting_and_nested_cells() {
        let doc = parse_spec(
            r#"{"data":{"values":[{"name":"a, \"b\"","v":[1,2],"f":1.5,"n":null}]}}"#,
            "s",
        )
        .unwrap();
        let ext = externalize_data(&doc, "out/");
        assert_eq!(
            ext.data_files[0].contents,
            "name,v,f,n\n\"a, \"\"b\"\"\",\"[1,2]\",1.5,"
        );
        assert_eq!(
            ext.doc.root.get("data").unwrap().get("url").unwrap().as_str(),
            Some("out/s_data_0.csv")
        );
    }

    #[test]
    fn scalar_rows_are_reported_and_kept() {
        let doc = parse_spec(r#"{"data":{"values":[1,2,3]},"mark":"tick"}"#, "s").unwrap();
        let ext = externalize_data(&doc, "");
        assert!(ext.data_files.is_empty());
        assert_eq!(ext.issues.len(), 1);
        assert_eq!(ext.doc.root, doc.root);
    }

    #[test]
    fn named_datasets_and_layers() {
        let doc = parse_spec(
            r#"{"datasets":{"d1":[{"x":1}]},"layer":[{"data":{"name":"d1"},"mark":"bar"},{"data":{"values":[{"y":2}]},"mark":"rule"}]}"#,
            "s",
        )
        .unwrap();
        let ext = externalize_data(&doc, "");
        assert_eq!(ext.data_files.len(), 2);
        assert_eq!(
            minify_spec(&ext.doc),
            r#"{"layer":[{"data":{"url":"s_data_0.csv"},"mark":"bar"},{"data":{"url":"s_data_1.csv"},"mark":"rule"}]}"#
        );
    }

    #[test]
    fn minify_pretty_spec() {
        let src = "{\n  \"mark\": \"bar\",\n  \"encoding\": {\n    \"x\": {\"field\": \"a b\"}\n  }\n}";
        let doc = parse_spec(src, "s").unwrap();
        let m = minify_spec(&doc);
        assert_eq!(m, r#"{"mark":"bar","encoding":{"x":{"field":"a b"}}}"#);
        let again = minify_spec(&parse_spec(&m, "s").unwrap());
        assert_eq!(again, m);
    }
}
