//! The `chartnl` command line. [`run`] parses arguments, executes one
//! subcommand and returns the process exit code: 0 on success, 1 on a
//! domain error, 2 on a usage error.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use chartnl_core::corpus::{dedup_indices, stratified_sample, summarize_corpus, CorpusError, SpecRecord, StrataCriteria, SummaryOptions};
use chartnl_core::diversity::{evaluate, DatasetSource, DiversityError, EmbeddingProvider, HashEmbedder, PrecomputedEmbeddings};
use chartnl_core::gateway::{ChatBackend, GatewayError};
use chartnl_core::lexical::{lexicon_stats, vocab_diff, Normalizer};
use chartnl_core::pipeline::{
    chart_histogram, paraphrase_dataset, sample_matched_sets, DatasetFile, DatasetHeader, GenerationOptions, NlRecord,
    NlType, ParaphraseError, SampleError,
};
use chartnl_core::preprocess::externalize_data;
use chartnl_core::promptforge::{build_coding_prompt, ParaphraseMode};
use chartnl_core::qualcoding::{cluster_codes, extract_codes, ClusterError, ClusterOptions, Code};
use chartnl_core::spec_model::Vocabulary;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::http::{HttpBackend, RemoteEmbeddings};
use crate::io::{self, FileError};
use crate::mock::MockGateway;
use crate::workflow::{generate_all, load_table, prepare_manifest};

/// Timestamp written into records by mock runs, so outputs are
/// reproducible.
pub const MOCK_CREATED_AT: &str = "1970-01-01T00:00:00Z";

#[derive(Debug, Parser)]
#[command(
    name = "chartnl",
    version,
    about = "Analyze chart-specification corpora and build natural-language datasets from them"
)]
struct Cli {
    /// TOML or JSON run configuration; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(flatten)]
    model: ModelFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ModelFlags {
    /// Base URL of an OpenAI-compatible API.
    #[arg(long, global = true)]
    endpoint: Option<String>,
    #[arg(long = "model", global = true)]
    model_name: Option<String>,
    #[arg(long, global = true)]
    temperature: Option<f64>,
    #[arg(long, global = true)]
    max_retries: Option<u32>,
    /// Per-request timeout in seconds.
    #[arg(long, global = true)]
    timeout: Option<u64>,
    /// Requests in flight at once.
    #[arg(long, global = true)]
    concurrency: Option<usize>,
    /// Environment variable holding the API key.
    #[arg(long, global = true)]
    api_key_env: Option<String>,
}

#[derive(Debug, Args)]
struct BackendFlags {
    /// Deterministic offline replies (the default).
    #[arg(long, conflicts_with = "live")]
    mock: bool,
    /// Call the configured endpoint.
    #[arg(long)]
    live: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProviderKind {
    Hash,
    Remote,
}

#[derive(Debug, Args)]
struct EmbedFlags {
    /// Precomputed vectors (`dim=<d>` header) with texts in the matching `.txt` file.
    #[arg(long, conflicts_with = "provider")]
    vectors: Vec<PathBuf>,
    #[arg(long, value_enum)]
    provider: Option<ProviderKind>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    One,
    Two,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the structural profile of each spec as JSON.
    Analyze {
        #[arg(required = true)]
        specs: Vec<PathBuf>,
        /// Count every key, not only Vega-Lite vocabulary keys.
        #[arg(long)]
        all_keys: bool,
    },
    /// Corpus summary table.
    Summarize {
        manifest: PathBuf,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Drop exact duplicate specs first.
        #[arg(long)]
        dedup: bool,
    },
    /// Complexity-stratified sample of spec ids.
    Sample {
        manifest: PathBuf,
        #[arg(long)]
        n: usize,
    },
    /// Move embedded data to CSV files and write minified specs.
    Preprocess {
        #[arg(required = true)]
        specs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate captions, utterances and questions for every chart.
    Generate {
        manifest: PathBuf,
        /// Comma-separated subset of caption_l1,caption_l2,utterance,question.
        #[arg(long, value_delimiter = ',', value_parser = parse_nl_type)]
        tasks: Vec<NlType>,
        #[command(flatten)]
        backend: BackendFlags,
        #[arg(long)]
        no_open_ended: bool,
        /// One utterance triple per view instead of one per chart.
        #[arg(long)]
        per_view_utterances: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Paraphrase every record along one or two language axes.
    Paraphrase {
        dataset: PathBuf,
        #[arg(long, value_enum, default_value = "one")]
        mode: ModeArg,
        #[command(flatten)]
        backend: BackendFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw sets from a paraphrase pool matching a reference's per-chart counts.
    MatchSample {
        pool: PathBuf,
        reference: PathBuf,
        #[arg(long, default_value_t = 5)]
        sets: usize,
        /// Directory for set_<k>.jsonl files.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Diversity metrics of candidate datasets against a reference; the
    /// last path is the reference. A directory counts as several sets.
    Evaluate {
        #[arg(required = true, num_args = 2..)]
        datasets: Vec<PathBuf>,
        #[command(flatten)]
        embed: EmbedFlags,
        #[arg(long)]
        span_percentile: Option<f64>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Token counts per dataset, and the vocabulary split for two.
    Lex {
        #[arg(required = true)]
        datasets: Vec<PathBuf>,
        /// Directory for per-dataset token frequency CSVs.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Qualitative codes for each sentence, optionally clustered.
    Codes {
        dataset: PathBuf,
        #[arg(long)]
        cluster: bool,
        #[command(flatten)]
        backend: BackendFlags,
        #[command(flatten)]
        embed: EmbedFlags,
        #[arg(long, default_value_t = 4)]
        min_pts: usize,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = 5)]
        reduce_dim: usize,
        /// Directory for codes.csv and clusters.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_nl_type(s: &str) -> Result<NlType, String> {
    NlType::parse(s).ok_or_else(|| {
        let names: Vec<&str> = NlType::ALL.iter().map(|t| t.name()).collect();
        format!("unknown task {:?}; expected one of {}", s, names.join(", "))
    })
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    File(#[from] FileError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("generation failed for {failed} chart(s); first error: {first}")]
    Generation { failed: usize, first: String },
    #[error(transparent)]
    Paraphrase(#[from] ParaphraseError),
    #[error("{0} paraphrase variant(s) failed")]
    ParaphraseFailures(usize),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Diversity(#[from] DiversityError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("writing output: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

/// Runs with the process's stdout and stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run_with(args, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e);
                    0
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    let _ = writeln!(err, "\n{}", Cli::command().render_help());
                    2
                }
            };
        }
    };
    match execute(cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e);
            if let CliError::Usage(_) = e {
                let _ = writeln!(err, "\n{}", Cli::command().render_help());
            }
            e.exit_code()
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_path(p)?,
        None => RunConfig::default(),
    };
    let m = &cli.model;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(v) = &m.endpoint {
        cfg.model.endpoint_url = v.clone();
    }
    if let Some(v) = &m.model_name {
        cfg.model.model_name = v.clone();
    }
    if let Some(v) = m.temperature {
        cfg.model.temperature = v;
    }
    if let Some(v) = m.max_retries {
        cfg.model.max_retries = v;
    }
    if let Some(v) = m.timeout {
        cfg.model.timeout_seconds = v;
    }
    if let Some(v) = m.concurrency {
        cfg.model.concurrency = v;
    }
    if let Some(v) = &m.api_key_env {
        cfg.model.api_key_env = v.clone();
    }
    if let Command::Evaluate {
        span_percentile,
        grid,
        k,
        ..
    } = &cli.command
    {
        if let Some(v) = span_percentile {
            cfg.metrics.span_percentile = *v;
        }
        if let Some(v) = grid {
            cfg.metrics.grid = *v;
        }
        if let Some(v) = k {
            cfg.metrics.k = *v;
        }
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

/// Explicit flag, else `<output_dir>/<default_name>` from the config, else
/// `None` (stdout).
fn resolve_out(flag: &Option<PathBuf>, cfg: &RunConfig, default_name: &str) -> Option<PathBuf> {
    flag.clone().or_else(|| cfg.output_dir.as_ref().map(|d| d.join(default_name)))
}

fn backend(flags: &BackendFlags) -> Box<dyn ChatBackend> {
    if flags.live {
        log::info!("using the live HTTP backend");
        Box::new(HttpBackend::new())
    } else {
        Box::new(MockGateway::new())
    }
}

fn created_at(flags: &BackendFlags) -> String {
    if flags.live {
        chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
    } else {
        MOCK_CREATED_AT.to_string()
    }
}

fn embedder(flags: &EmbedFlags, cfg: &RunConfig) -> Result<Box<dyn EmbeddingProvider>, CliError> {
    if !flags.vectors.is_empty() {
        let mut merged = PrecomputedEmbeddings::default();
        for p in &flags.vectors {
            let e = io::read_precomputed(p)?;
            if merged.dim != 0 && merged.dim != e.dim {
                return Err(CliError::Usage(format!(
                    "{} has dim {} but earlier vector files have dim {}",
                    p.display(),
                    e.dim,
                    merged.dim
                )));
            }
            merged.dim = e.dim;
            merged.table.extend(e.table);
        }
        return Ok(Box::new(merged));
    }
    Ok(match flags.provider.unwrap_or(ProviderKind::Hash) {
        ProviderKind::Hash => Box::new(HashEmbedder::default()),
        ProviderKind::Remote => Box::new(RemoteEmbeddings::new(cfg.model.clone(), &cfg.embedding_model)),
    })
}

fn header(corpus_id: &str, cfg: &RunConfig) -> DatasetHeader {
    DatasetHeader {
        corpus_id: corpus_id.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_digest: cfg.digest(),
    }
}

fn emit_dataset(file: &DatasetFile, path: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => io::write_dataset(p, file, &BTreeMap::new())?,
        None => io::write_dataset_to(out, file, &BTreeMap::new())?,
    }
    Ok(())
}

fn thread_pool(concurrency: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(concurrency.max(1))
        .build()
        .expect("thread pool")
}

fn analyzed_manifest(manifest: &Path) -> Result<Vec<SpecRecord>, CliError> {
    let vocab = Vocabulary::embedded();
    let mut records = Vec::new();
    for e in io::read_manifest(manifest)? {
        let doc = io::read_spec(&e.path, &e.id)?;
        let table = load_table(&doc, e.path.parent().unwrap_or(Path::new(""))).unwrap_or_else(|err| {
            log::warn!("{}: {}", e.id, err);
            None
        });
        records.push(SpecRecord::analyze(doc, Some(&vocab), table.as_ref()));
    }
    Ok(records)
}

fn texts(records: &[NlRecord]) -> Vec<String> {
    records.iter().map(|r| r.text.clone()).collect()
}

fn file_stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// A dataset file is one set; a directory contributes each `.jsonl` file in
/// it, in name order.
fn load_sets(path: &Path) -> Result<Vec<Vec<String>>, CliError> {
    if !path.is_dir() {
        return Ok(vec![texts(&io::read_dataset(path)?.file.records)]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|source| FileError::Io {
            path: path.to_path_buf(),
            source,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
        .collect();
    files.sort();
    files
        .iter()
        .map(|f| Ok(texts(&io::read_dataset(f)?.file.records)))
        .collect()
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load_config(&cli)?;
    match &cli.command {
        Command::Analyze { specs, all_keys } => {
            let vocab = Vocabulary::embedded();
            for path in specs {
                let doc = io::read_spec(path, &io::spec_id(path))?;
                let table = load_table(&doc, path.parent().unwrap_or(Path::new(""))).unwrap_or(None);
                let r = SpecRecord::analyze(doc, (!all_keys).then_some(&vocab), table.as_ref());
                let v = json!({
                    "id": r.doc.id,
                    "schema_version": r.doc.schema_version,
                    "key_count": r.profile.key_count,
                    "max_depth": r.profile.max_depth,
                    "branching_factor": r.profile.branching_factor,
                    "unique_keys": r.profile.unique_keys,
                    "excluded_key_count": r.profile.excluded_key_count,
                    "level": r.level.name(),
                    "composition": r.composition,
                    "interactions": r.interactions,
                    "chart_types": r.chart_types.as_ref().map(|c| &c.types),
                });
                writeln!(out, "{}", serde_json::to_string_pretty(&v).expect("json"))?;
            }
        }
        Command::Summarize { manifest, csv, dedup } => {
            let mut records = analyzed_manifest(manifest)?;
            if *dedup {
                let fps: Vec<[u8; 32]> = records.iter().map(|r| r.fingerprint).collect();
                let keep = dedup_indices(&fps);
                let dropped = records.len() - keep.len();
                records = keep.into_iter().map(|i| records[i].clone()).collect();
                writeln!(err, "dropped {} duplicate spec(s)", dropped)?;
            }
            let opts = SummaryOptions {
                seed: cfg.seed,
                ..SummaryOptions::default()
            };
            let summary = summarize_corpus(&records, &opts)?;
            writeln!(out, "{}", summary.to_text())?;
            if let Some(p) = resolve_out(csv, &cfg, "summary.csv") {
                io::write_text(&p, &summary.to_csv())?;
            }
        }
        Command::Sample { manifest, n } => {
            let records = analyzed_manifest(manifest)?;
            for r in stratified_sample(&records, *n, &StrataCriteria::default(), cfg.seed)? {
                writeln!(
                    out,
                    "{}\t{}\t{}\t{}",
                    r.doc.id,
                    r.level.name(),
                    if r.composition.is_composite { "composite" } else { "single" },
                    if r.interactions.has_interaction { "interactive" } else { "static" }
                )?;
            }
        }
        Command::Preprocess { specs, out: dir } => {
            for path in specs {
                let doc = io::read_spec(path, &io::spec_id(path))?;
                let ext = externalize_data(&doc, "");
                for issue in &ext.issues {
                    writeln!(err, "warning: {}: {}", doc.id, issue)?;
                }
                for f in &ext.data_files {
                    io::write_text(&dir.join(&f.file_name), &f.contents)?;
                }
                let spec_path = dir.join(format!("{}.json", doc.id));
                io::write_text(&spec_path, &chartnl_core::preprocess::minify_spec(&ext.doc))?;
                writeln!(out, "{}\t{}\t{} data file(s)", doc.id, spec_path.display(), ext.data_files.len())?;
            }
        }
        Command::Generate {
            manifest,
            tasks,
            backend: flags,
            no_open_ended,
            per_view_utterances,
            out: out_path,
        } => {
            let charts = prepare_manifest(&io::read_manifest(manifest)?)?;
            let mut opts = GenerationOptions {
                include_open_ended: !no_open_ended,
                collapse_utterances: !per_view_utterances,
                created_at: created_at(flags),
                ..GenerationOptions::default()
            };
            if !tasks.is_empty() {
                opts.tasks = tasks.iter().copied().collect();
            }
            let gw = backend(flags);
            let (records, errors) = generate_all(&charts, &opts, gw.as_ref(), &cfg.model, cfg.model.concurrency);
            let file = DatasetFile {
                header: header(&file_stem(manifest), &cfg),
                records,
            };
            emit_dataset(&file, resolve_out(out_path, &cfg, "dataset.jsonl").as_deref(), out)?;
            for e in &errors {
                writeln!(err, "error: {}", e)?;
            }
            if let Some(first) = errors.first() {
                return Err(CliError::Generation {
                    failed: errors.len(),
                    first: first.error.to_string(),
                });
            }
        }
        Command::Paraphrase {
            dataset,
            mode,
            backend: flags,
            out: out_path,
        } => {
            let input = io::read_dataset(dataset)?.file;
            let mode = match mode {
                ModeArg::One => ParaphraseMode::OneAxis,
                ModeArg::Two => ParaphraseMode::TwoAxes,
            };
            let gw = backend(flags);
            let stamp = created_at(flags);
            let chunks = thread_pool(cfg.model.concurrency).install(|| {
                input
                    .records
                    .par_iter()
                    .map(|r| paraphrase_dataset(std::slice::from_ref(r), mode, gw.as_ref(), &cfg.model, &stamp))
                    .collect::<Result<Vec<_>, _>>()
            })?;
            let mut records = Vec::new();
            let mut failures = 0;
            for c in chunks {
                records.extend(c.records);
                for f in &c.failures {
                    writeln!(err, "error: {}: {}: {}", f.source_record_id, chartnl_core::pipeline::variant_tag(&f.spec), f.error)?;
                }
                failures += c.failures.len();
            }
            let file = DatasetFile {
                header: header(&input.header.corpus_id, &cfg),
                records,
            };
            emit_dataset(&file, resolve_out(out_path, &cfg, "paraphrases.jsonl").as_deref(), out)?;
            if failures > 0 {
                return Err(CliError::ParaphraseFailures(failures));
            }
        }
        Command::MatchSample {
            pool,
            reference,
            sets,
            out: dir,
        } => {
            let pool = io::read_dataset(pool)?.file;
            let reference = io::read_dataset(reference)?.file;
            let histogram = chart_histogram(&reference.records);
            let drawn = sample_matched_sets(&pool.records, &histogram, *sets, cfg.seed)?;
            let dir = dir.clone().or_else(|| cfg.output_dir.clone());
            for (k, set) in drawn.into_iter().enumerate() {
                let name = format!("set_{}.jsonl", k + 1);
                let n = set.len();
                let file = DatasetFile {
                    header: header(&pool.header.corpus_id, &cfg),
                    records: set,
                };
                match &dir {
                    Some(d) => {
                        io::write_dataset(&d.join(&name), &file, &BTreeMap::new())?;
                        writeln!(out, "{}\t{} records", name, n)?;
                    }
                    None => io::write_dataset_to(&mut *out, &file, &BTreeMap::new())?,
                }
            }
        }
        Command::Evaluate { datasets, embed, csv, .. } => {
            let (reference_path, candidates) = datasets.split_last().expect("clap enforces two paths");
            let reference = texts(&io::read_dataset(reference_path)?.file.records);
            let sources = candidates
                .iter()
                .map(|p| {
                    Ok(DatasetSource {
                        name: file_stem(p),
                        sets: load_sets(p)?,
                    })
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            let provider = embedder(embed, &cfg)?;
            let report = evaluate(&reference, &sources, provider.as_ref(), &cfg.metrics.eval_options())?;
            writeln!(out, "{}", report.to_text())?;
            if let Some(p) = resolve_out(csv, &cfg, "metrics.csv") {
                io::write_text(&p, &report.to_csv())?;
            }
        }
        Command::Lex { datasets, out: dir } => {
            let normalizer = Normalizer::embedded();
            let mut all = Vec::new();
            writeln!(out, "dataset\ttotal_tokens\tunique_tokens")?;
            for p in datasets {
                let records = io::read_dataset(p)?.file.records;
                let tokens: Vec<Vec<String>> = records.par_iter().map(|r| normalizer.normalize(&r.text)).collect();
                let stats = lexicon_stats(&tokens);
                writeln!(out, "{}\t{}\t{}", file_stem(p), stats.total_tokens, stats.unique_tokens)?;
                if let Some(d) = dir.clone().or_else(|| cfg.output_dir.clone()) {
                    io::write_text(&d.join(format!("{}.tokens.csv", file_stem(p))), &stats.to_csv())?;
                }
                all.push(stats);
            }
            if let [a, b] = all.as_slice() {
                let d = vocab_diff(a, b);
                writeln!(
                    out,
                    "only_in_first\t{}\nonly_in_second\t{}\nshared\t{}",
                    d.only_in_a.len(),
                    d.only_in_b.len(),
                    d.shared.len()
                )?;
            }
        }
        Command::Codes {
            dataset,
            cluster,
            backend: flags,
            embed,
            min_pts,
            eps,
            reduce_dim,
            out: dir,
        } => {
            let records = io::read_dataset(dataset)?.file.records;
            let gw = backend(flags);
            let replies = thread_pool(cfg.model.concurrency).install(|| {
                records
                    .par_iter()
                    .map(|r| {
                        let prompt = build_coding_prompt(&r.text).map_err(|e| GatewayError::MalformedResponse(e.to_string()))?;
                        gw.complete(&prompt, &cfg.model).map(|c| (r.id.clone(), c.text))
                    })
                    .collect::<Result<Vec<_>, GatewayError>>()
            })?;
            let mut codes: Vec<Code> = Vec::new();
            for (id, reply) in &replies {
                let extraction = extract_codes(reply, id);
                if let Some(n) = extraction.arity_warning {
                    writeln!(err, "warning: {}: {} code(s) instead of 5", id, n)?;
                }
                codes.extend(extraction.codes);
            }
            let rows: Vec<Vec<String>> = codes.iter().map(|c| vec![c.text.clone(), c.source_sentence_id.clone()]).collect();
            let codes_csv = chartnl_core::preprocess::render_csv(&["code".into(), "source_sentence_id".into()], &rows);
            let dir = dir.clone().or_else(|| cfg.output_dir.clone());
            match &dir {
                Some(d) => io::write_text(&d.join("codes.csv"), &codes_csv)?,
                None => writeln!(out, "{}", codes_csv)?,
            }
            if *cluster {
                let provider = embedder(embed, &cfg)?;
                let opts = ClusterOptions {
                    reduce_dim: *reduce_dim,
                    eps: *eps,
                    min_pts: *min_pts,
                };
                let clustering = cluster_codes(&codes, provider.as_ref(), &opts)?;
                writeln!(out, "{} cluster(s), eps {:.4}", clustering.cluster_count(), clustering.eps)?;
                for (label, top) in clustering.top_codes(5) {
                    let cells: Vec<String> = top.iter().map(|(c, n)| format!("{} ({})", c, n)).collect();
                    let name = if label < 0 { "noise".to_string() } else { label.to_string() };
                    writeln!(out, "{}\t{}", name, cells.join("; "))?;
                }
                if let Some(d) = &dir {
                    io::write_text(&d.join("clusters.csv"), &clustering.to_csv())?;
                }
            }
        }
    }
    Ok(())
}
