//! Backing data tables, field descriptors for prompts, and a small exact
//! aggregation engine used to verify numbers that end up in captions.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::json::SpecNode;
use crate::spec_model::SpecDocument;

/// Maximum number of categorical values rendered per field in the ftt block.
pub const FTT_VALUE_CAP: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldType {
    Quantitative,
    Nominal,
    Ordinal,
    Temporal,
}

impl FieldType {
    pub fn parse(s: &str) -> Option<FieldType> {
        match s {
            "quantitative" | "Q" => Some(FieldType::Quantitative),
            "nominal" | "N" => Some(FieldType::Nominal),
            "ordinal" | "O" => Some(FieldType::Ordinal),
            "temporal" | "T" => Some(FieldType::Temporal),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FieldType::Quantitative => "quantitative",
            FieldType::Nominal => "nominal",
            FieldType::Ordinal => "ordinal",
            FieldType::Temporal => "temporal",
        }
    }

    pub fn is_categorical(self) -> bool {
        matches!(self, FieldType::Nominal | FieldType::Ordinal)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub inferred_type: FieldType,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldDataError {
    #[error("field {0:?} is not a column of the data table")]
    UnknownField(String),
    #[error("{op} needs a numeric column but {field:?} is {found}")]
    TypeError {
        field: String,
        op: &'static str,
        found: &'static str,
    },
    #[error("no usable cells for {0:?}")]
    EmptyInput(String),
    #[error("row {row} has {found} cells, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
}

/// A rectangular table of text cells. Empty cells are missing values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataTable {
    columns: Vec<Column>,
    rows: Vec<Vec<String>>,
}

/// Parses a cell as a finite number.
pub fn parse_number(cell: &str) -> Option<f64> {
    let t = cell.trim();
    if t.is_empty() {
        return None;
    }
    let first = t.as_bytes()[0];
    if !(first.is_ascii_digit() || first == b'-' || first == b'+' || first == b'.') {
        return None;
    }
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_int(cell: &str) -> Option<i64> {
    let t = cell.trim();
    let t = t.strip_prefix('+').unwrap_or(t);
    t.parse::<i64>().ok()
}

fn digits(s: &str, n: usize) -> bool {
    s.len() == n && s.bytes().all(|b| b.is_ascii_digit())
}

/// Accepts `YYYY-MM-DD` with an optional ISO-8601 time part.
pub fn is_temporal(cell: &str) -> bool {
    let t = cell.trim();
    let (date, time) = match t.find(['T', ' ']) {
        Some(i) => (&t[..i], Some(&t[i + 1..])),
        None => (t, None),
    };
    let mut parts = date.split('-');
    let (Some(y), Some(m), Some(d), None) = (parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return false;
    };
    if !(digits(y, 4) && digits(m, 2) && digits(d, 2)) {
        return false;
    }
    let (m, d): (u32, u32) = (m.parse().unwrap_or(0), d.parse().unwrap_or(0));
    if !(1..=12).contains(&m) || !(1..=31).contains(&d) {
        return false;
    }
    match time {
        None => true,
        Some(time) => {
            let time = time.trim_end_matches('Z');
            let time = match time.rfind(['+', '-']) {
                Some(i) if i >= 5 => &time[..i],
                _ => time,
            };
            let mut hms = time.split(':');
            let h = hms.next().unwrap_or("");
            let mi = hms.next().unwrap_or("");
            let s = hms.next();
            digits(h, 2)
                && digits(mi, 2)
                && s.is_none_or(|s| {
                    let whole = s.split('.').next().unwrap_or("");
                    digits(whole, 2)
                })
        }
    }
}

/// Quantitative if at least 95% of non-empty cells are numbers, temporal if
/// at least 95% are dates, nominal otherwise.
pub fn infer_type<'a>(cells: impl Iterator<Item = &'a str>) -> FieldType {
    let mut non_empty = 0usize;
    let mut numeric = 0usize;
    let mut temporal = 0usize;
    for c in cells {
        if c.trim().is_empty() {
            continue;
        }
        non_empty += 1;
        if parse_number(c).is_some() {
            numeric += 1;
        } else if is_temporal(c) {
            temporal += 1;
        }
    }
    if non_empty == 0 {
        return FieldType::Nominal;
    }
    if numeric * 100 >= non_empty * 95 {
        FieldType::Quantitative
    } else if temporal * 100 >= non_empty * 95 {
        FieldType::Temporal
    } else {
        FieldType::Nominal
    }
}

impl DataTable {
    pub fn new(names: Vec<String>, rows: Vec<Vec<String>>) -> Result<DataTable, FieldDataError> {
        for (i, r) in rows.iter().enumerate() {
            if r.len() != names.len() {
                return Err(FieldDataError::RaggedRow {
                    row: i,
                    expected: names.len(),
                    found: r.len(),
                });
            }
        }
        let columns = names
            .into_iter()
            .enumerate()
            .map(|(j, name)| Column {
                inferred_type: infer_type(rows.iter().map(|r| r[j].as_str())),
                name,
            })
            .collect();
        Ok(DataTable { columns, rows })
    }

    /// Test and fixture helper; panics on ragged input.
    pub fn from_rows(names: &[&str], rows: &[&[&str]]) -> DataTable {
        DataTable::new(
            names.iter().map(|s| s.to_string()).collect(),
            rows.iter()
                .map(|r| r.iter().map(|s| s.to_string()).collect())
                .collect(),
        )
        .expect("rectangular rows")
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column_type(&self, name: &str) -> Option<FieldType> {
        self.column_index(name).map(|i| self.columns[i].inferred_type)
    }

    /// Distinct non-empty values of a column in first-seen order.
    pub fn unique_values(&self, name: &str) -> Option<Vec<String>> {
        let j = self.column_index(name)?;
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for r in &self.rows {
            let v = r[j].trim();
            if !v.is_empty() && seen.insert(v) {
                out.push(v.to_string());
            }
        }
        Some(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDescriptor {
    pub field: String,
    pub title: Option<String>,
    pub declared_type: FieldType,
    pub unique_values: Option<Vec<String>>,
}

impl FieldDescriptor {
    /// `field | title | type | values: v1, v2, …` with `-` for a missing title.
    pub fn ftt_line(&self) -> String {
        let mut line = format!(
            "{} | {} | {}",
            self.field,
            self.title.as_deref().unwrap_or("-"),
            self.declared_type.name()
        );
        if let Some(values) = &self.unique_values {
            line.push_str(" | values: ");
            let shown = values.len().min(FTT_VALUE_CAP);
            line.push_str(&values[..shown].join(", "));
            if values.len() > shown {
                line.push_str(&format!(", … (+{} more)", values.len() - shown));
            }
        }
        line
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldSummary {
    pub descriptors: Vec<FieldDescriptor>,
    pub ftt: String,
}

/// Output names of transforms (`as`) anywhere in the spec; these fields do
/// not exist in the source table.
fn derived_fields(node: &SpecNode, inside_transform: bool, out: &mut BTreeSet<String>) {
    match node {
        SpecNode::Scalar(_) => {}
        SpecNode::Array(items) => items.iter().for_each(|c| derived_fields(c, inside_transform, out)),
        SpecNode::Object(entries) => {
            for (k, v) in entries {
                if k == "values" || k == "datasets" {
                    continue;
                }
                if inside_transform && k == "as" {
                    match v {
                        SpecNode::Scalar(_) => {
                            if let Some(s) = v.as_str() {
                                out.insert(s.to_string());
                            }
                        }
                        SpecNode::Array(items) => {
                            out.extend(items.iter().filter_map(SpecNode::as_str).map(String::from))
                        }
                        SpecNode::Object(_) => {}
                    }
                }
                derived_fields(v, inside_transform || k == "transform", out);
            }
        }
    }
}

struct ChannelUse<'a> {
    field: &'a str,
    declared: Option<FieldType>,
    title: Option<&'a str>,
}

fn channel_uses(doc: &SpecDocument) -> Vec<ChannelUse<'_>> {
    let mut uses = Vec::new();
    crate::spec_model::for_each_view(&doc.root, &mut |view| {
        let Some(enc) = view.get("encoding").and_then(SpecNode::as_object) else {
            return;
        };
        for (_, def) in enc {
            let defs: Vec<&SpecNode> = match def {
                SpecNode::Array(items) => items.iter().collect(),
                other => alloc::vec![other],
            };
            for d in defs {
                if let Some(field) = d.get("field").and_then(SpecNode::as_str) {
                    uses.push(ChannelUse {
                        field,
                        declared: d.get("type").and_then(SpecNode::as_str).and_then(FieldType::parse),
                        title: d.get("title").and_then(SpecNode::as_str),
                    });
                }
            }
        }
    });
    uses
}

/// One descriptor per distinct source field referenced by an encoding
/// channel, plus the rendered ftt block (one line per field).
pub fn extract_field_descriptors(
    doc: &SpecDocument,
    table: &DataTable,
) -> Result<FieldSummary, FieldDataError> {
    collect_descriptors(doc, Some(table))
}

/// Like [`extract_field_descriptors`] for charts whose data is not at
/// hand: types come from the spec (nominal when undeclared) and no value
/// lists are shown.
pub fn declared_field_descriptors(doc: &SpecDocument) -> FieldSummary {
    collect_descriptors(doc, None).expect("no table lookups without a table")
}

fn collect_descriptors(doc: &SpecDocument, table: Option<&DataTable>) -> Result<FieldSummary, FieldDataError> {
    let mut derived = BTreeSet::new();
    derived_fields(&doc.root, false, &mut derived);
    let mut descriptors: Vec<FieldDescriptor> = Vec::new();
    for u in channel_uses(doc) {
        if derived.contains(u.field) {
            continue;
        }
        if let Some(existing) = descriptors.iter_mut().find(|d| d.field == u.field) {
            if existing.title.is_none() {
                existing.title = u.title.map(String::from);
            }
            continue;
        }
        let (declared_type, unique_values) = match table {
            Some(table) => {
                let inferred = table
                    .column_type(u.field)
                    .ok_or_else(|| FieldDataError::UnknownField(u.field.to_string()))?;
                let declared_type = u.declared.unwrap_or(inferred);
                let values = if declared_type.is_categorical() {
                    table.unique_values(u.field)
                } else {
                    None
                };
                (declared_type, values)
            }
            None => (u.declared.unwrap_or(FieldType::Nominal), None),
        };
        descriptors.push(FieldDescriptor {
            field: u.field.to_string(),
            title: u.title.map(String::from),
            declared_type,
            unique_values,
        });
    }
    let ftt = descriptors
        .iter()
        .map(FieldDescriptor::ftt_line)
        .collect::<Vec<_>>()
        .join("\n");
    Ok(FieldSummary { descriptors, ftt })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregateOp {
    Max,
    Min,
    Sum,
    Mean,
    Count,
    /// max − min
    Difference,
}

impl AggregateOp {
    pub fn name(self) -> &'static str {
        match self {
            AggregateOp::Max => "max",
            AggregateOp::Min => "min",
            AggregateOp::Sum => "sum",
            AggregateOp::Mean => "mean",
            AggregateOp::Count => "count",
            AggregateOp::Difference => "difference",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregationQuery {
    pub op: AggregateOp,
    pub field: String,
    pub group_by: Option<String>,
    /// Keep only rows whose `(field, value)` cell equals the value.
    pub filter: Option<(String, String)>,
}

/// An aggregate value; integer inputs stay exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AggValue {
    Int(i128),
    Float(f64),
}

impl AggValue {
    pub fn as_f64(self) -> f64 {
        match self {
            AggValue::Int(i) => i as f64,
            AggValue::Float(f) => f,
        }
    }
}

impl fmt::Display for AggValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AggValue::Int(i) => write!(f, "{}", i),
            AggValue::Float(x) => {
                let r = libm::round(*x * 1e6) / 1e6;
                write!(f, "{}", r)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AggregationOutput {
    Scalar(AggValue),
    Groups(Vec<(String, AggValue)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationResult {
    pub output: AggregationOutput,
    /// Empty or unparseable cells left out of the computation.
    pub skipped: usize,
}

#[derive(Default)]
struct Acc {
    ints: Vec<i64>,
    floats: Vec<f64>,
    all_int: bool,
    usable: usize,
}

impl Acc {
    fn new() -> Acc {
        Acc {
            all_int: true,
            ..Acc::default()
        }
    }

    fn push(&mut self, cell: &str) -> bool {
        let Some(v) = parse_number(cell) else {
            return false;
        };
        self.floats.push(v);
        match parse_int(cell) {
            Some(i) => self.ints.push(i),
            None => self.all_int = false,
        }
        self.usable += 1;
        true
    }

    fn finish(&self, op: AggregateOp) -> Option<AggValue> {
        if op == AggregateOp::Count {
            return Some(AggValue::Int(self.usable as i128));
        }
        if self.usable == 0 {
            return None;
        }
        if self.all_int {
            let it = self.ints.iter().map(|&i| i as i128);
            let max = it.clone().max()?;
            let min = it.clone().min()?;
            let sum: i128 = it.sum();
            Some(match op {
                AggregateOp::Max => AggValue::Int(max),
                AggregateOp::Min => AggValue::Int(min),
                AggregateOp::Sum => AggValue::Int(sum),
                AggregateOp::Difference => AggValue::Int(max - min),
                AggregateOp::Mean => AggValue::Float(sum as f64 / self.usable as f64),
                AggregateOp::Count => unreachable!(),
            })
        } else {
            let xs = &self.floats;
            let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
            let sum: f64 = xs.iter().sum();
            Some(AggValue::Float(match op {
                AggregateOp::Max => max,
                AggregateOp::Min => min,
                AggregateOp::Sum => sum,
                AggregateOp::Difference => max - min,
                AggregateOp::Mean => sum / xs.len() as f64,
                AggregateOp::Count => unreachable!(),
            }))
        }
    }
}

/// Evaluates `q` over `table` with a single scan.
pub fn evaluate_aggregation(
    table: &DataTable,
    q: &AggregationQuery,
) -> Result<AggregationResult, FieldDataError> {
    let target = table
        .column_index(&q.field)
        .ok_or_else(|| FieldDataError::UnknownField(q.field.clone()))?;
    let numeric = q.op != AggregateOp::Count;
    let ty = table.columns[target].inferred_type;
    if numeric && ty != FieldType::Quantitative {
        return Err(FieldDataError::TypeError {
            field: q.field.clone(),
            op: q.op.name(),
            found: ty.name(),
        });
    }
    let group = match &q.group_by {
        Some(g) => Some(
            table
                .column_index(g)
                .ok_or_else(|| FieldDataError::UnknownField(g.clone()))?,
        ),
        None => None,
    };
    let filter = match &q.filter {
        Some((f, v)) => Some((
            table
                .column_index(f)
                .ok_or_else(|| FieldDataError::UnknownField(f.clone()))?,
            v.trim(),
        )),
        None => None,
    };

    let mut groups: Vec<(String, Acc)> = Vec::new();
    let mut skipped = 0usize;
    for row in &table.rows {
        if let Some((fi, v)) = filter {
            if row[fi].trim() != v {
                continue;
            }
        }
        let key = group.map(|g| row[g].trim()).unwrap_or("");
        let slot = match groups.iter().position(|(k, _)| k == key) {
            Some(i) => i,
            None => {
                groups.push((key.to_string(), Acc::new()));
                groups.len() - 1
            }
        };
        let cell = row[target].as_str();
        let ok = if numeric {
            groups[slot].1.push(cell)
        } else if cell.trim().is_empty() {
            false
        } else {
            groups[slot].1.usable += 1;
            true
        };
        if !ok {
            skipped += 1;
        }
    }

    let output = if group.is_some() {
        let values: Vec<(String, AggValue)> = groups
            .iter()
            .filter_map(|(k, acc)| acc.finish(q.op).map(|v| (k.clone(), v)))
            .collect();
        if values.is_empty() && numeric {
            return Err(FieldDataError::EmptyInput(q.field.clone()));
        }
        AggregationOutput::Groups(values)
    } else {
        let acc = groups.pop().map(|(_, a)| a).unwrap_or_default();
        AggregationOutput::Scalar(
            acc.finish(q.op)
                .ok_or_else(|| FieldDataError::EmptyInput(q.field.clone()))?,
        )
    };
    Ok(AggregationResult { output, skipped })
}

fn contains_phrase(haystack: &str, phrase: &str) -> bool {
    if phrase.is_empty() {
        return false;
    }
    let bytes = haystack.as_bytes();
    let mut from = 0;
    while let Some(i) = haystack[from..].find(phrase) {
        let start = from + i;
        let end = start + phrase.len();
        let left_ok = start == 0 || !bytes[start - 1].is_ascii_alphanumeric();
        let right_ok = end == bytes.len() || !bytes[end].is_ascii_alphanumeric();
        if left_ok && right_ok {
            return true;
        }
        from = start + 1;
        while !haystack.is_char_boundary(from) {
            from += 1;
        }
    }
    false
}

fn mention_forms(d: &FieldDescriptor) -> Vec<String> {
    let mut forms = alloc::vec![d.field.to_lowercase(), d.field.to_lowercase().replace('_', " ")];
    if let Some(t) = &d.title {
        forms.push(t.to_lowercase());
    }
    forms
}

/// Earliest byte position at which any form of the field is mentioned.
fn mention_position(q: &str, d: &FieldDescriptor) -> Option<usize> {
    mention_forms(d)
        .iter()
        .filter(|f| contains_phrase(q, f))
        .filter_map(|f| q.find(f.as_str()))
        .min()
}

/// Maps a natural-language question onto an aggregation query when its
/// operation, target field and optional grouping/filter can be recognised.
pub fn infer_query(question: &str, table: &DataTable, fields: &[FieldDescriptor]) -> Option<AggregationQuery> {
    let q = question.to_lowercase();
    let has = |words: &[&str]| words.iter().any(|w| contains_phrase(&q, w));
    let op = if has(&["difference", "gap", "range between", "how much more", "how much higher"]) {
        AggregateOp::Difference
    } else if has(&["average", "mean", "avg"]) {
        AggregateOp::Mean
    } else if has(&["total", "sum", "combined", "overall"]) {
        AggregateOp::Sum
    } else if has(&["highest", "maximum", "max", "largest", "greatest", "peak", "most"]) {
        AggregateOp::Max
    } else if has(&["lowest", "minimum", "min", "smallest", "least", "fewest"]) {
        AggregateOp::Min
    } else if has(&["how many", "count", "number of"]) {
        AggregateOp::Count
    } else {
        return None;
    };

    let quantitative: Vec<&FieldDescriptor> = fields
        .iter()
        .filter(|d| table.column_type(&d.field) == Some(FieldType::Quantitative))
        .collect();
    let target = if op == AggregateOp::Count {
        fields
            .iter()
            .filter_map(|d| mention_position(&q, d).map(|p| (p, d)))
            .min_by_key(|(p, _)| *p)
            .map(|(_, d)| d)
            .or_else(|| fields.first())?
    } else {
        let mentioned = quantitative
            .iter()
            .filter_map(|d| mention_position(&q, d).map(|p| (p, *d)))
            .min_by_key(|(p, _)| *p)
            .map(|(_, d)| d);
        match mentioned {
            Some(d) => d,
            None if quantitative.len() == 1 => quantitative[0],
            None => return None,
        }
    };

    // A categorical value named in the question becomes an equality filter.
    let mut filter: Option<(String, String)> = None;
    let mut best_len = 0;
    for d in fields.iter().filter(|d| d.declared_type.is_categorical()) {
        if let Some(values) = table.unique_values(&d.field) {
            for v in values {
                let lv = v.to_lowercase();
                if lv.len() > best_len && contains_phrase(&q, &lv) {
                    best_len = lv.len();
                    filter = Some((d.field.clone(), v));
                }
            }
        }
    }

    let mut group_by = None;
    for d in fields.iter().filter(|d| d.declared_type.is_categorical() || d.declared_type == FieldType::Temporal) {
        if d.field == target.field {
            continue;
        }
        for form in mention_forms(d) {
            for lead in ["by ", "each ", "per ", "for every "] {
                if contains_phrase(&q, &format!("{}{}", lead, form)) {
                    group_by = Some(d.field.clone());
                }
            }
        }
    }
    if filter.as_ref().map(|f| &f.0) == group_by.as_ref() {
        group_by = None;
    }

    Some(AggregationQuery {
        op,
        field: target.field.clone(),
        group_by,
        filter,
    })
}

/// Renders a result as a short factual sentence fragment.
pub fn describe_result(q: &AggregationQuery, r: &AggregationResult) -> String {
    let mut head = format!("{} of {}", q.op.name(), q.field);
    if let Some((f, v)) = &q.filter {
        head.push_str(&format!(" where {} = {}", f, v));
    }
    match &r.output {
        AggregationOutput::Scalar(v) => format!("{} is {}", head, v),
        AggregationOutput::Groups(gs) => {
            let parts: Vec<String> = gs.iter().map(|(k, v)| format!("{}: {}", k, v)).collect();
            format!(
                "{} by {} is {}",
                head,
                q.group_by.as_deref().unwrap_or(""),
                parts.join(", ")
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec_model::parse_spec;

    fn sales() -> DataTable {
        DataTable::from_rows(
            &["region", "price", "month"],
            &[
                &["East", "10", "2021-01-01"],
                &["West", "4", "2021-02-01"],
                &["East", "6", "2021-03-01"],
                &["North", "7", "2021-04-01"],
                &["West", "", "2021-05-01"],
                &["North", "9", "2021-06-01"],
            ],
        )
    }

    fn q(op: AggregateOp, field: &str) -> AggregationQuery {
        AggregationQuery {
            op,
            field: field.into(),
            group_by: None,
            filter: None,
        }
    }

    #[test]
    fn type_inference() {
        let t = sales();
        assert_eq!(t.column_type("region"), Some(FieldType::Nominal));
        assert_eq!(t.column_type("price"), Some(FieldType::Quantitative));
        assert_eq!(t.column_type("month"), Some(FieldType::Temporal));
        assert!(is_temporal("2020-03-04T10:20:30.5Z"));
        assert!(is_temporal("2020-03-04 10:20"));
        assert!(!is_temporal("2020-13-04"));
        assert!(!is_temporal("March"));
    }

    #[test]
    fn ninety_five_percent_rule() {
        let mut cells: Vec<&str> = core::iter::repeat_n("1", 19).collect();
        cells.push("n/a");
        assert_eq!(infer_type(cells.iter().copied()), FieldType::Quantitative);
        cells.push("n/a");
        assert_eq!(infer_type(cells.iter().copied()), FieldType::Nominal);
    }

    #[test]
    fn max_and_difference() {
        let t = DataTable::from_rows(&["v"], &[&["1"], &["5"], &["3"]]);
        let r = evaluate_aggregation(&t, &q(AggregateOp::Max, "v")).unwrap();
        assert_eq!(r.output, AggregationOutput::Scalar(AggValue::Int(5)));
        let t = DataTable::from_rows(&["v"], &[&["2"], &["7"], &["4"]]);
        let r = evaluate_aggregation(&t, &q(AggregateOp::Difference, "v")).unwrap();
        assert_eq!(r.output, AggregationOutput::Scalar(AggValue::Int(5)));
    }

    #[test]
    fn grouped_mean_skips_empty_cells() {
        let mut query = q(AggregateOp::Mean, "price");
        query.group_by = Some("region".into());
        let r = evaluate_aggregation(&sales(), &query).unwrap();
        assert_eq!(r.skipped, 1);
        assert_eq!(
            r.output,
            AggregationOutput::Groups(alloc::vec![
                ("East".into(), AggValue::Float(8.0)),
                ("West".into(), AggValue::Float(4.0)),
                ("North".into(), AggValue::Float(8.0)),
            ])
        );
    }

    #[test]
    fn mixed_int_and_float_cells() {
        let t = DataTable::from_rows(&["v"], &[&["1"], &["2.5"], &["3"]]);
        let r = evaluate_aggregation(&t, &q(AggregateOp::Sum, "v")).unwrap();
        assert_eq!(r.output, AggregationOutput::Scalar(AggValue::Float(6.5)));
        let r = evaluate_aggregation(&t, &q(AggregateOp::Max, "v")).unwrap();
        assert_eq!(r.output, AggregationOutput::Scalar(AggValue::Float(3.0)));
    }

    #[test]
    fn filter_and_count() {
        let mut query = q(AggregateOp::Count, "region");
        query.filter = Some(("region".into(), "West".into()));
        let r = evaluate_aggregation(&sales(), &query).unwrap();
        assert_eq!(r.output, AggregationOutput::Scalar(AggValue::Int(2)));
    }

    #[test]
    fn numeric_op_on_text_column_fails() {
        assert!(matches!(
            evaluate_aggregation(&sales(), &q(AggregateOp::Sum, "region")),
            Err(FieldDataError::TypeError { .. })
        ));
    }

    #[test]
    fn empty_input() {
        let t = DataTable::from_rows(&["v"], &[&["1"], &[""]]);
        let mut query = q(AggregateOp::Max, "v");
        query.filter = Some(("v".into(), "".into()));
        assert!(matches!(
            evaluate_aggregation(&t, &query),
            Err(FieldDataError::EmptyInput(_))
        ));
    }

    #[test]
    fn descriptors_and_ftt() {
        let doc = parse_spec(
            r#"{"mark":"bar","encoding":{"x":{"field":"region","type":"nominal","title":"Sales Region"},"y":{"field":"price","type":"quantitative","aggregate":"sum"},"tooltip":[{"field":"price"},{"field":"region"}]}}"#,
            "t",
        )
        .unwrap();
        let s = extract_field_descriptors(&doc, &sales()).unwrap();
        assert_eq!(s.descriptors.len(), 2);
        let region = &s.descriptors[0];
        assert_eq!(region.title.as_deref(), Some("Sales Region"));
        assert_eq!(region.unique_values.as_ref().unwrap(), &["East", "West", "North"]);
        assert_eq!(s.descriptors[1].unique_values, None);
        assert_eq!(
            s.ftt,
            "region | Sales Region | nominal | values: East, West, North\nprice | - | quantitative"
        );
    }

    #[test]
    fn unknown_field() {
        let doc = parse_spec(r#"{"mark":"bar","encoding":{"y":{"field":"profit"}}}"#, "t").unwrap();
        assert_eq!(
            extract_field_descriptors(&doc, &sales()),
            Err(FieldDataError::UnknownField("profit".into()))
        );
    }

    #[test]
    fn transform_outputs_are_not_looked_up() {
        let doc = parse_spec(
            r#"{"transform":[{"calculate":"datum.price*2","as":"double"}],"mark":"bar","encoding":{"y":{"field":"double","type":"quantitative"},"x":{"field":"region","type":"nominal"}}}"#,
            "t",
        )
        .unwrap();
        let s = extract_field_descriptors(&doc, &sales()).unwrap();
        assert_eq!(s.descriptors.len(), 1);
    }

    #[test]
    fn ftt_values_are_capped() {
        let names: Vec<String> = (0..60).map(|i| format!("c{}", i)).collect();
        let d = FieldDescriptor {
            field: "cat".into(),
            title: None,
            declared_type: FieldType::Nominal,
            unique_values: Some(names),
        };
        let line = d.ftt_line();
        assert!(line.contains("c49, … (+10 more)"));
        assert!(!line.contains("c50"));
    }

    #[test]
    fn question_inference() {
        let fields = alloc::vec![
            FieldDescriptor {
                field: "region".into(),
                title: Some("Sales Region".into()),
                declared_type: FieldType::Nominal,
                unique_values: sales().unique_values("region"),
            },
            FieldDescriptor {
                field: "price".into(),
                title: None,
                declared_type: FieldType::Quantitative,
                unique_values: None,
            },
        ];
        let t = sales();
        let got = infer_query("What is the highest price in the East?", &t, &fields).unwrap();
        assert_eq!(got.op, AggregateOp::Max);
        assert_eq!(got.field, "price");
        assert_eq!(got.filter, Some(("region".into(), "East".into())));
        let got = infer_query("What is the average price by region?", &t, &fields).unwrap();
        assert_eq!(got.op, AggregateOp::Mean);
        assert_eq!(got.group_by.as_deref(), Some("region"));
        let got = infer_query(
            "What is the difference between the highest and lowest price?",
            &t,
            &fields,
        )
        .unwrap();
        assert_eq!(got.op, AggregateOp::Difference);
        assert!(infer_query("Why does it look like this?", &t, &fields).is_none());
    }
}
