//! Per-chart generation (L1 and L2 captions, utterances, questions),
//! paraphrasing, and frequency-matched sampling of evaluation sets.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fielddata::{describe_result, evaluate_aggregation, infer_query, DataTable, FieldDescriptor};
use crate::gateway::{parse_steps, ChatBackend, GatewayError, ModelConfig, StepError, StepParse};
use crate::promptforge::{
    build_l1_prompt, build_l2_prompts, build_paraphrase_prompt, build_question_prompt,
    build_utterance_prompts, enumerate_paraphrase_variants, Axis, L2Stage, ParaphraseMode,
    ParaphraseSpec, PromptError, RenderedPrompt, UtteranceStage,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NlType {
    CaptionL1,
    CaptionL2,
    Utterance,
    Question,
}

impl NlType {
    pub const ALL: [NlType; 4] = [NlType::CaptionL1, NlType::CaptionL2, NlType::Utterance, NlType::Question];

    pub fn name(self) -> &'static str {
        match self {
            NlType::CaptionL1 => "caption_l1",
            NlType::CaptionL2 => "caption_l2",
            NlType::Utterance => "utterance",
            NlType::Question => "question",
        }
    }

    pub fn parse(s: &str) -> Option<NlType> {
        NlType::ALL.into_iter().find(|t| t.name() == s.trim())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subtype {
    Command,
    Query,
    Question,
    NonvisualLookup,
    NonvisualCompositional,
    VisualLookup,
    VisualCompositional,
    OpenEnded,
}

impl Subtype {
    pub fn name(self) -> &'static str {
        match self {
            Subtype::Command => "command",
            Subtype::Query => "query",
            Subtype::Question => "question",
            Subtype::NonvisualLookup => "nonvisual_lookup",
            Subtype::NonvisualCompositional => "nonvisual_compositional",
            Subtype::VisualLookup => "visual_lookup",
            Subtype::VisualCompositional => "visual_compositional",
            Subtype::OpenEnded => "open_ended",
        }
    }

    fn belongs_to(self, t: NlType) -> bool {
        match self {
            Subtype::Command | Subtype::Query | Subtype::Question => t == NlType::Utterance,
            _ => t == NlType::Question,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Generated,
    Paraphrased {
        axes: Vec<Axis>,
        scores: Vec<u8>,
        source_record_id: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NlRecord {
    pub id: String,
    pub chart_id: String,
    pub nl_type: NlType,
    pub subtype: Option<Subtype>,
    pub text: String,
    pub provenance: Provenance,
    pub model_name: String,
    pub created_at: String,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl NlRecord {
    pub fn is_generated(&self) -> bool {
        self.provenance == Provenance::Generated
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub corpus_id: String,
    pub tool_version: String,
    pub config_digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetFile {
    pub header: DatasetHeader,
    pub records: Vec<NlRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("record id {0:?} appears more than once")]
    DuplicateId(String),
    #[error("record {id:?}: subtype {subtype:?} does not fit nl_type {nl_type:?}")]
    SubtypeMismatch {
        id: String,
        nl_type: NlType,
        subtype: Option<Subtype>,
    },
    #[error("paraphrased record {id:?} references unknown source {source_id:?}")]
    DanglingSource { id: String, source_id: String },
}

impl DatasetFile {
    /// Checks id uniqueness and the nl_type/subtype pairing. Paraphrase
    /// sources are only checked when `check_sources` is set, since a pool
    /// file usually omits the originals.
    pub fn validate(&self, check_sources: bool) -> Result<(), SchemaError> {
        let mut ids = BTreeSet::new();
        for r in &self.records {
            if !ids.insert(r.id.as_str()) {
                return Err(SchemaError::DuplicateId(r.id.clone()));
            }
            let ok = match (r.nl_type, r.subtype) {
                (NlType::CaptionL1 | NlType::CaptionL2, None) => true,
                (t @ (NlType::Utterance | NlType::Question), Some(s)) => s.belongs_to(t),
                _ => false,
            };
            if !ok {
                return Err(SchemaError::SubtypeMismatch {
                    id: r.id.clone(),
                    nl_type: r.nl_type,
                    subtype: r.subtype,
                });
            }
        }
        if check_sources {
            for r in &self.records {
                if let Provenance::Paraphrased { source_record_id, .. } = &r.provenance {
                    if !ids.contains(source_record_id.as_str()) {
                        return Err(SchemaError::DanglingSource {
                            id: r.id.clone(),
                            source_id: source_record_id.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Everything one chart contributes to generation.
#[derive(Debug, Clone, Copy)]
pub struct ChartInput<'a> {
    pub chart_id: &'a str,
    /// Minified spec with data already externalized.
    pub minified_spec: &'a str,
    pub ftt: &'a str,
    pub fields: &'a [FieldDescriptor],
    pub table: Option<&'a DataTable>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationOptions {
    pub tasks: BTreeSet<NlType>,
    pub include_open_ended: bool,
    /// One utterance triple per chart instead of one per view.
    pub collapse_utterances: bool,
    /// Written into every record; fixed in hermetic runs.
    pub created_at: String,
}

impl Default for GenerationOptions {
    fn default() -> Self {
        GenerationOptions {
            tasks: NlType::ALL.into_iter().collect(),
            include_open_ended: true,
            collapse_utterances: true,
            created_at: "1970-01-01T00:00:00Z".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StageErrorKind {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Steps(#[from] StepError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("chart {chart_id}, stage {stage}: {kind}")]
pub struct StageError {
    pub chart_id: String,
    pub stage: &'static str,
    pub kind: StageErrorKind,
}

/// A failed generation run, with whatever was finished before the failure.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{error} ({} records completed)", completed.len())]
pub struct PartialResultError {
    pub completed: Vec<NlRecord>,
    pub error: StageError,
}

struct Run<'a> {
    chart: ChartInput<'a>,
    backend: &'a dyn ChatBackend,
    cfg: &'a ModelConfig,
    opts: &'a GenerationOptions,
    records: Vec<NlRecord>,
}

impl Run<'_> {
    fn fail(&self, stage: &'static str, kind: impl Into<StageErrorKind>) -> StageError {
        StageError {
            chart_id: self.chart.chart_id.to_string(),
            stage,
            kind: kind.into(),
        }
    }

    fn ask(&self, stage: &'static str, prompt: Result<RenderedPrompt, PromptError>) -> Result<String, StageError> {
        let prompt = prompt.map_err(|e| self.fail(stage, e))?;
        self.backend
            .complete(&prompt, self.cfg)
            .map(|c| c.text)
            .map_err(|e| self.fail(stage, e))
    }

    fn steps(&self, stage: &'static str, text: &str, labels: &[&str]) -> Result<StepParse, StageError> {
        parse_steps(text, labels).map_err(|e| self.fail(stage, e))
    }

    fn push(&mut self, nl_type: NlType, subtype: Option<Subtype>, index: usize, text: &str, metadata: BTreeMap<String, String>) {
        let id = match subtype {
            Some(s) => format!("{}:{}:{}:{}", self.chart.chart_id, nl_type.name(), s.name(), index),
            None => format!("{}:{}:{}", self.chart.chart_id, nl_type.name(), index),
        };
        self.records.push(NlRecord {
            id,
            chart_id: self.chart.chart_id.to_string(),
            nl_type,
            subtype,
            text: text.trim().to_string(),
            provenance: Provenance::Generated,
            model_name: self.cfg.model_name.clone(),
            created_at: self.opts.created_at.clone(),
            metadata,
        });
    }

    fn caption_l1(&mut self) -> Result<(), StageError> {
        const STAGE: &str = "caption_l1";
        let c = self.chart;
        let reply = self.ask(STAGE, build_l1_prompt(c.minified_spec, c.ftt))?;
        let steps = self.steps(
            STAGE,
            &reply,
            &["Step 1. Composite Views", "Step 2. Chart Semantics", "Step 3. Level 1 NL Description"],
        )?;
        // Step-2 bullets ("- Mark: bar") are kept as chart semantics.
        let mut meta = BTreeMap::new();
        for line in steps.get(2).unwrap_or("").lines() {
            if let Some((k, v)) = line.trim().trim_start_matches('-').split_once(':') {
                meta.insert(format!("semantics.{}", k.trim()), v.trim().to_string());
            }
        }
        meta.insert("composite_views".into(), steps.get(1).unwrap_or("").to_string());
        let text = steps.get(3).unwrap_or("").to_string();
        self.push(NlType::CaptionL1, None, 0, &text, meta);
        Ok(())
    }

    fn caption_l2(&mut self) -> Result<(), StageError> {
        let c = self.chart;
        let reply = self.ask("l2_feature", build_l2_prompts(c.minified_spec, c.ftt, L2Stage::Feature))?;
        let steps = self.steps(
            "l2_feature",
            &reply,
            &["Step 1. Features", "Step 2. Operations", "Step 3. Questions"],
        )?;
        let questions = steps.list(3);
        let mut info = Vec::new();
        let mut verified = 0;
        for q in &questions {
            let answer = self.ask("l2_answer", build_l2_prompts(c.minified_spec, c.ftt, L2Stage::Answer { question: q }))?;
            // Prefer an exact answer computed from the table when the
            // question maps onto a supported aggregation.
            let computed = c.table.and_then(|t| {
                let query = infer_query(q, t, c.fields)?;
                let result = evaluate_aggregation(t, &query).ok()?;
                Some(describe_result(&query, &result))
            });
            match computed {
                Some(fact) => {
                    verified += 1;
                    info.push(format!("{} {}", q, fact));
                }
                None => info.push(format!("{} {}", q, answer.trim())),
            }
        }
        let info = info.join("\n");
        let reply = self.ask("l2_caption", build_l2_prompts(c.minified_spec, c.ftt, L2Stage::Caption { info: &info }))?;
        let text = match reply.rfind("Level 2 NL Description:") {
            Some(i) => &reply[i + "Level 2 NL Description:".len()..],
            None => reply.as_str(),
        };
        if text.trim().is_empty() {
            return Err(self.fail("l2_caption", StepError::EmptyStep("Level 2 NL Description".into())));
        }
        let mut meta = BTreeMap::new();
        meta.insert("feature".into(), steps.get(1).unwrap_or("").to_string());
        meta.insert("questions".into(), questions.join("; "));
        meta.insert("info".into(), info.clone());
        meta.insert("verified_answers".into(), format!("{}/{}", verified, questions.len()));
        self.push(NlType::CaptionL2, None, 0, text, meta);
        Ok(())
    }

    fn utterances(&mut self) -> Result<(), StageError> {
        let c = self.chart;
        let reply = self.ask(
            "utterance_instructions",
            build_utterance_prompts(c.minified_spec, c.ftt, UtteranceStage::Instructions),
        )?;
        let steps = self.steps(
            "utterance_instructions",
            &reply,
            &["Step 1. Composite Views", "Step 2. Instructions", "Step 3. Instructions"],
        )?;
        let instructions = steps.get(3).unwrap_or("").to_string();
        let reply = self.ask(
            "utterance_combine",
            build_utterance_prompts(c.minified_spec, c.ftt, UtteranceStage::Combine { inst_first_concat: &instructions }),
        )?;
        let mut blocks = split_views(&reply);
        if self.opts.collapse_utterances {
            blocks.truncate(1);
        }
        for (view, block) in blocks.iter().enumerate() {
            let steps = self.steps(
                "utterance_combine",
                block,
                &["Step 1. Primary Information", "Step 3. Command", "Step 4. Query", "Step 5. Question"],
            )?;
            let mut meta = BTreeMap::new();
            meta.insert("view".into(), format!("{}", view + 1));
            meta.insert("primary_information".into(), steps.get(1).unwrap_or("").to_string());
            for (n, sub) in [(3, Subtype::Command), (4, Subtype::Query), (5, Subtype::Question)] {
                let text = steps.get(n).unwrap_or("").to_string();
                self.push(NlType::Utterance, Some(sub), view, &text, meta.clone());
            }
        }
        Ok(())
    }

    fn questions(&mut self) -> Result<(), StageError> {
        const LABELS: [&str; 11] = [
            "Step 1. Decision",
            "Step 2. Conclusion",
            "Step 3. Specific Value",
            "Step 4. Lookup Question",
            "Step 5. Visual Attributes",
            "Step 6. Paraphrased Question",
            "Step 7. Operations",
            "Step 8. Compositional Question",
            "Step 9. Visual Attributes",
            "Step 10. Paraphrased Question",
            "Step 11. Open-ended Question",
        ];
        let reply = self.ask("question", build_question_prompt(self.chart.minified_spec))?;
        let steps = self.steps("question", &reply, &LABELS)?;
        let mut meta = BTreeMap::new();
        meta.insert("decision".into(), steps.get(1).unwrap_or("").to_string());
        meta.insert("conclusion".into(), steps.get(2).unwrap_or("").to_string());
        let mut picks = alloc::vec![
            (4, Subtype::NonvisualLookup),
            (6, Subtype::VisualLookup),
            (8, Subtype::NonvisualCompositional),
            (10, Subtype::VisualCompositional),
        ];
        if self.opts.include_open_ended {
            picks.push((11, Subtype::OpenEnded));
        }
        for (n, sub) in picks {
            let text = steps.get(n).unwrap_or("").to_string();
            self.push(NlType::Question, Some(sub), 0, &text, meta.clone());
        }
        Ok(())
    }
}

/// Splits a combined-utterance reply into `View #k:` blocks; a reply
/// without view headers is one block.
fn split_views(reply: &str) -> Vec<String> {
    let mut blocks: Vec<String> = Vec::new();
    let mut current = String::new();
    let mut seen_header = false;
    for line in reply.lines() {
        if line.trim_start().starts_with("View #") {
            if seen_header && !current.trim().is_empty() {
                blocks.push(core::mem::take(&mut current));
            }
            current.clear();
            seen_header = true;
            continue;
        }
        current.push_str(line);
        current.push('\n');
    }
    if !current.trim().is_empty() || blocks.is_empty() {
        blocks.push(current);
    }
    blocks
}

/// Runs the requested tasks for one chart in the fixed order L1, L2,
/// utterance, question.
pub fn run_generation(
    chart: ChartInput<'_>,
    opts: &GenerationOptions,
    backend: &dyn ChatBackend,
    cfg: &ModelConfig,
) -> Result<Vec<NlRecord>, PartialResultError> {
    let mut run = Run {
        chart,
        backend,
        cfg,
        opts,
        records: Vec::new(),
    };
    for task in NlType::ALL.into_iter().filter(|t| opts.tasks.contains(t)) {
        let outcome = match task {
            NlType::CaptionL1 => run.caption_l1(),
            NlType::CaptionL2 => run.caption_l2(),
            NlType::Utterance => run.utterances(),
            NlType::Question => run.questions(),
        };
        if let Err(error) = outcome {
            return Err(PartialResultError {
                completed: run.records,
                error,
            });
        }
    }
    Ok(run.records)
}

/// Records per chart for a given task set when each task succeeds.
pub fn expected_record_count(opts: &GenerationOptions, views: usize) -> usize {
    opts.tasks
        .iter()
        .map(|t| match t {
            NlType::CaptionL1 | NlType::CaptionL2 => 1,
            NlType::Utterance if opts.collapse_utterances => 3,
            NlType::Utterance => 3 * views.max(1),
            NlType::Question => 4 + opts.include_open_ended as usize,
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParaphraseError {
    #[error("record {0:?} is already a paraphrase")]
    AlreadyParaphrased(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParaphraseFailure {
    pub source_record_id: String,
    pub spec: ParaphraseSpec,
    pub error: StageErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParaphraseOutput {
    pub records: Vec<NlRecord>,
    pub failures: Vec<ParaphraseFailure>,
}

pub fn variant_tag(spec: &ParaphraseSpec) -> String {
    spec.axes
        .iter()
        .zip(&spec.scores)
        .map(|(a, s)| format!("{}{}", a.name().to_lowercase(), s))
        .collect::<Vec<_>>()
        .join("+")
}

/// One paraphrase per variant per input record. Individual failures are
/// collected; the run continues.
pub fn paraphrase_dataset(
    records: &[NlRecord],
    mode: ParaphraseMode,
    backend: &dyn ChatBackend,
    cfg: &ModelConfig,
    created_at: &str,
) -> Result<ParaphraseOutput, ParaphraseError> {
    if let Some(r) = records.iter().find(|r| !r.is_generated()) {
        return Err(ParaphraseError::AlreadyParaphrased(r.id.clone()));
    }
    let variants = enumerate_paraphrase_variants(mode);
    let mut out = ParaphraseOutput::default();
    for r in records {
        for spec in &variants {
            let reply = build_paraphrase_prompt(&r.text, spec)
                .map_err(StageErrorKind::from)
                .and_then(|p| backend.complete(&p, cfg).map_err(StageErrorKind::from));
            match reply {
                Ok(c) if !c.text.trim().is_empty() => out.records.push(NlRecord {
                    id: format!("{}~{}", r.id, variant_tag(spec)),
                    chart_id: r.chart_id.clone(),
                    nl_type: r.nl_type,
                    subtype: r.subtype,
                    text: c.text.trim().to_string(),
                    provenance: Provenance::Paraphrased {
                        axes: spec.axes.clone(),
                        scores: spec.scores.clone(),
                        source_record_id: r.id.clone(),
                    },
                    model_name: cfg.model_name.clone(),
                    created_at: created_at.to_string(),
                    metadata: BTreeMap::new(),
                }),
                Ok(_) => out.failures.push(ParaphraseFailure {
                    source_record_id: r.id.clone(),
                    spec: spec.clone(),
                    error: StepError::EmptyStep("paraphrase".into()).into(),
                }),
                Err(error) => out.failures.push(ParaphraseFailure {
                    source_record_id: r.id.clone(),
                    spec: spec.clone(),
                    error,
                }),
            }
        }
    }
    Ok(out)
}

/// Per-chart record counts in first-seen chart order.
pub fn chart_histogram(records: &[NlRecord]) -> Vec<(String, usize)> {
    let mut out: Vec<(String, usize)> = Vec::new();
    for r in records {
        match out.iter_mut().find(|(c, _)| *c == r.chart_id) {
            Some(entry) => entry.1 += 1,
            None => out.push((r.chart_id.clone(), 1)),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SampleError {
    #[error("chart {chart_id} needs {needed} paraphrases but the pool holds {available}")]
    PoolExhausted {
        chart_id: String,
        needed: usize,
        available: usize,
    },
}

/// Draws `n_sets` sets that each reproduce `reference` (chart → count)
/// exactly, sampling uniformly without replacement within each chart.
/// Set `s` uses ChaCha stream `s` of `seed`.
pub fn sample_matched_sets(
    pool: &[NlRecord],
    reference: &[(String, usize)],
    n_sets: usize,
    seed: u64,
) -> Result<Vec<Vec<NlRecord>>, SampleError> {
    let mut by_chart: BTreeMap<&str, Vec<&NlRecord>> = BTreeMap::new();
    let mut seen_text: BTreeSet<(&str, &str)> = BTreeSet::new();
    for r in pool {
        // Identical paraphrases of one chart count once.
        if seen_text.insert((r.chart_id.as_str(), r.text.as_str())) {
            by_chart.entry(&r.chart_id).or_default().push(r);
        }
    }
    for (chart, needed) in reference {
        let available = by_chart.get(chart.as_str()).map_or(0, Vec::len);
        if available < *needed {
            return Err(SampleError::PoolExhausted {
                chart_id: chart.clone(),
                needed: *needed,
                available,
            });
        }
    }
    let mut sets = Vec::with_capacity(n_sets);
    for s in 0..n_sets {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(s as u64);
        let mut set = Vec::new();
        for (chart, needed) in reference {
            let candidates = &by_chart[chart.as_str()];
            let mut picks = index::sample(&mut rng, candidates.len(), *needed).into_vec();
            picks.sort_unstable();
            set.extend(picks.into_iter().map(|i| candidates[i].clone()));
        }
        sets.push(set);
    }
    Ok(sets)
}
