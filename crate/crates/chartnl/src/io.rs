//! File formats: corpus manifests, spec and data-table loading, dataset
//! JSON-lines files and precomputed vector files.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chartnl_core::diversity::{DiversityError, PrecomputedEmbeddings};
use chartnl_core::fielddata::{DataTable, FieldDataError};
use chartnl_core::json::{self, SpecNode};
use chartnl_core::pipeline::{DatasetFile, DatasetHeader, NlRecord, SchemaError};
use chartnl_core::preprocess::rows_to_table;
use chartnl_core::spec_model::{parse_spec, ParseError, SpecDocument};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

/// Marker key of the header line in dataset files.
pub const HEADER_KEY: &str = "__header__";

const RECORD_FIELDS: [&str; 9] = [
    "id",
    "chart_id",
    "nl_type",
    "subtype",
    "text",
    "provenance",
    "model_name",
    "created_at",
    "metadata",
];

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Malformed { path: PathBuf, line: usize, message: String },
    #[error("{}: {source}", path.display())]
    Spec { path: PathBuf, source: ParseError },
    #[error("{}: {source}", path.display())]
    Schema { path: PathBuf, source: SchemaError },
    #[error("{}: {source}", path.display())]
    Table { path: PathBuf, source: FieldDataError },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}: {source}", path.display())]
    Vectors { path: PathBuf, source: DiversityError },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FileError + '_ {
    move |source| FileError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_text(path: &Path) -> Result<String, FileError> {
    fs::read_to_string(path).map_err(io_err(path))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), FileError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

/// One corpus entry. `path` is resolved against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub path: PathBuf,
    #[serde(default)]
    pub license_tag: Option<String>,
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, FileError> {
    let text = read_text(path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut e: ManifestEntry = serde_json::from_str(line).map_err(|e| FileError::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if e.path.is_relative() {
            e.path = base.join(&e.path);
        }
        entries.push(e);
    }
    Ok(entries)
}

pub fn read_spec(path: &Path, id: &str) -> Result<SpecDocument, FileError> {
    parse_spec(&read_text(path)?, id).map_err(|source| FileError::Spec {
        path: path.to_path_buf(),
        source,
    })
}

/// Spec id from a file name: `charts/bar.vl.json` → `bar`.
pub fn spec_id(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    name.split('.').next().unwrap_or(&name).to_string()
}

/// Parses CSV text (header row required) into a table.
pub fn parse_csv_table(text: &str, path: &Path) -> Result<DataTable, FileError> {
    let csv_err = |source| FileError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let names: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        rows.push(rec.map_err(csv_err)?.iter().map(String::from).collect());
    }
    DataTable::new(names, rows).map_err(|source| FileError::Table {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a local `.csv`, or a `.json` file holding an array of row objects.
pub fn read_table(path: &Path) -> Result<DataTable, FileError> {
    let text = read_text(path)?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if !is_json {
        return parse_csv_table(&text, path);
    }
    let malformed = |message: String| FileError::Malformed {
        path: path.to_path_buf(),
        line: 1,
        message,
    };
    let node = json::parse(&text).map_err(|e| malformed(e.to_string()))?;
    let (header, rows) = rows_to_table(&node).ok_or_else(|| malformed("expected an array of row objects".into()))?;
    DataTable::new(header, rows).map_err(|source| FileError::Table {
        path: path.to_path_buf(),
        source,
    })
}

/// Resolves the spec's top-level `data.url` to a local file, if it is one.
pub fn local_data_path(doc: &SpecDocument, spec_dir: &Path) -> Option<PathBuf> {
    let url = doc.root.get("data")?.get("url").and_then(SpecNode::as_str)?;
    if url.contains("://") {
        return None;
    }
    let p = spec_dir.join(url);
    p.is_file().then_some(p)
}

/// A dataset file plus per-record fields this version does not know about.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub file: DatasetFile,
    /// Unknown fields by record id, written back on save.
    pub extra: BTreeMap<String, Map<String, Value>>,
}

pub fn empty_dataset(header: DatasetHeader) -> DatasetFile {
    DatasetFile {
        header,
        records: Vec::new(),
    }
}

/// Reads a dataset written by [`write_dataset`]. An empty file yields zero
/// records and a blank header.
pub fn read_dataset(path: &Path) -> Result<LoadedDataset, FileError> {
    let text = read_text(path)?;
    let malformed = |line: usize, message: String| FileError::Malformed {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut header = None;
    let mut records = Vec::new();
    let mut extra = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(line).map_err(|e| malformed(i + 1, e.to_string()))?;
        let Value::Object(mut obj) = value else {
            return Err(malformed(i + 1, "expected a JSON object".into()));
        };
        if let Some(h) = obj.remove(HEADER_KEY) {
            if header.is_some() || !records.is_empty() {
                return Err(malformed(i + 1, "header must be the first line".into()));
            }
            header = Some(serde_json::from_value(h).map_err(|e| malformed(i + 1, e.to_string()))?);
            continue;
        }
        let unknown: Map<String, Value> = obj
            .iter()
            .filter(|(k, _)| !RECORD_FIELDS.contains(&k.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let record: NlRecord = serde_json::from_value(Value::Object(obj)).map_err(|e| malformed(i + 1, e.to_string()))?;
        if !unknown.is_empty() {
            log::warn!(
                "{}:{}: keeping unknown fields {:?}",
                path.display(),
                i + 1,
                unknown.keys().collect::<Vec<_>>()
            );
            extra.insert(record.id.clone(), unknown);
        }
        records.push(record);
    }
    let file = DatasetFile {
        header: header.unwrap_or_else(|| DatasetHeader {
            corpus_id: String::new(),
            tool_version: String::new(),
            config_digest: String::new(),
        }),
        records,
    };
    file.validate(false).map_err(|source| FileError::Schema {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(LoadedDataset { file, extra })
}

/// Header line, then one record per line.
pub fn write_dataset_to<W: Write>(
    out: W,
    file: &DatasetFile,
    extra: &BTreeMap<String, Map<String, Value>>,
) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    let mut header = Map::new();
    header.insert(HEADER_KEY.into(), serde_json::to_value(&file.header)?);
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for r in &file.records {
        let mut value = serde_json::to_value(r)?;
        if let (Value::Object(obj), Some(more)) = (&mut value, extra.get(&r.id)) {
            for (k, v) in more {
                obj.entry(k.clone()).or_insert_with(|| v.clone());
            }
        }
        serde_json::to_writer(&mut out, &value)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn write_dataset(
    path: &Path,
    file: &DatasetFile,
    extra: &BTreeMap<String, Map<String, Value>>,
) -> Result<(), FileError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let f = fs::File::create(path).map_err(io_err(path))?;
    write_dataset_to(f, file, extra).map_err(io_err(path))
}

/// Reads `dim=<d>` followed by one whitespace-separated vector per line.
pub fn read_vectors(path: &Path) -> Result<(usize, Vec<Vec<f64>>), FileError> {
    let text = read_text(path)?;
    let malformed = |line: usize, message: String| FileError::Malformed {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or_else(|| malformed(1, "missing dim=<d> header".into()))?;
    let dim: usize = first
        .trim()
        .strip_prefix("dim=")
        .and_then(|d| d.trim().parse().ok())
        .ok_or_else(|| malformed(1, format!("expected dim=<d>, found {:?}", first)))?;
    let mut vectors = Vec::new();
    for (i, line) in lines {
        let v = line
            .split_whitespace()
            .map(str::parse::<f64>)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| malformed(i + 1, e.to_string()))?;
        vectors.push(v);
    }
    Ok((dim, vectors))
}

pub fn write_vectors(path: &Path, dim: usize, vectors: &[Vec<f64>]) -> Result<(), FileError> {
    let mut text = format!("dim={}\n", dim);
    for v in vectors {
        let cells: Vec<String> = v.iter().map(f64::to_string).collect();
        text.push_str(&cells.join(" "));
        text.push('\n');
    }
    write_text(path, &text)
}

/// Vectors from `path`, texts from the file next to it with a `.txt`
/// extension, aligned by line.
pub fn read_precomputed(path: &Path) -> Result<PrecomputedEmbeddings, FileError> {
    let (dim, vectors) = read_vectors(path)?;
    let text_path = path.with_extension("txt");
    let texts: Vec<String> = read_text(&text_path)?.lines().map(String::from).collect();
    if texts.len() != vectors.len() {
        return Err(FileError::Malformed {
            path: text_path,
            line: texts.len(),
            message: format!("{} texts for {} vectors", texts.len(), vectors.len()),
        });
    }
    PrecomputedEmbeddings::from_pairs(dim, &texts, vectors).map_err(|source| FileError::Vectors {
        path: path.to_path_buf(),
        source,
    })
}
