//! Glue between files on disk and the core pipeline: preparing charts for
//! prompting and running generation over a corpus in parallel.

use std::path::Path;

use chartnl_core::fielddata::{declared_field_descriptors, extract_field_descriptors, DataTable, FieldSummary};
use chartnl_core::gateway::{ChatBackend, ModelConfig};
use chartnl_core::pipeline::{run_generation, ChartInput, GenerationOptions, NlRecord, PartialResultError};
use chartnl_core::preprocess::{externalize_data, minify_spec, ExternalizedSpec};
use chartnl_core::spec_model::{detect_composition, SpecDocument};
use rayon::prelude::*;

use crate::io::{self, FileError, ManifestEntry};

/// A chart ready for the prompts: data moved out, spec minified, fields
/// described.
#[derive(Debug, Clone)]
pub struct PreparedChart {
    pub id: String,
    pub externalized: ExternalizedSpec,
    pub minified: String,
    pub table: Option<DataTable>,
    pub fields: FieldSummary,
    pub view_count: usize,
}

impl PreparedChart {
    pub fn input(&self) -> ChartInput<'_> {
        ChartInput {
            chart_id: &self.id,
            minified_spec: &self.minified,
            ftt: &self.fields.ftt,
            fields: &self.fields.descriptors,
            table: self.table.as_ref(),
        }
    }
}

fn table_from(ext: &ExternalizedSpec, doc: &SpecDocument, spec_dir: &Path) -> Result<Option<DataTable>, FileError> {
    match ext.data_files.first() {
        Some(f) => Ok(Some(io::parse_csv_table(&f.contents, Path::new(&f.file_name))?)),
        None => io::local_data_path(doc, spec_dir).map(|p| io::read_table(&p)).transpose(),
    }
}

/// The chart's backing table: its first embedded dataset, else a local
/// file named by `data.url`.
pub fn load_table(doc: &SpecDocument, spec_dir: &Path) -> Result<Option<DataTable>, FileError> {
    table_from(&externalize_data(doc, ""), doc, spec_dir)
}

/// Externalizes embedded data (URLs are bare file names) and picks the
/// backing table: the first externalized dataset, else a local file named
/// by `data.url`. Without a table the ftt block lists declared types only.
pub fn prepare_chart(doc: &SpecDocument, spec_dir: &Path) -> Result<PreparedChart, FileError> {
    let externalized = externalize_data(doc, "");
    for issue in &externalized.issues {
        log::warn!("{}: {}", doc.id, issue);
    }
    let table = table_from(&externalized, doc, spec_dir)?;
    let fields = match &table {
        Some(t) => extract_field_descriptors(&externalized.doc, t).unwrap_or_else(|e| {
            log::warn!("{}: {}; using declared field types", doc.id, e);
            declared_field_descriptors(&externalized.doc)
        }),
        None => declared_field_descriptors(&externalized.doc),
    };
    let view_count = detect_composition(doc, table.as_ref()).view_count.exact().unwrap_or(1);
    Ok(PreparedChart {
        id: doc.id.clone(),
        minified: minify_spec(&externalized.doc),
        externalized,
        table,
        fields,
        view_count,
    })
}

pub fn prepare_manifest(entries: &[ManifestEntry]) -> Result<Vec<PreparedChart>, FileError> {
    entries
        .iter()
        .map(|e| {
            let doc = io::read_spec(&e.path, &e.id)?;
            prepare_chart(&doc, e.path.parent().unwrap_or(Path::new("")))
        })
        .collect()
}

/// Generation over many charts, `concurrency` at a time. Records come back
/// in chart order regardless of scheduling; failed charts contribute what
/// they finished and their error.
pub fn generate_all(
    charts: &[PreparedChart],
    opts: &GenerationOptions,
    backend: &dyn ChatBackend,
    cfg: &ModelConfig,
    concurrency: usize,
) -> (Vec<NlRecord>, Vec<PartialResultError>) {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(concurrency.max(1))
        .build()
        .expect("thread pool");
    let results: Vec<Result<Vec<NlRecord>, PartialResultError>> = pool.install(|| {
        charts
            .par_iter()
            .map(|c| run_generation(c.input(), opts, backend, cfg))
            .collect()
    });
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(rs) => records.extend(rs),
            Err(e) => {
                records.extend(e.completed.iter().cloned());
                errors.push(e);
            }
        }
    }
    (records, errors)
}
