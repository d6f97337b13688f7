//! Chat-completion plumbing that does not need IO: model settings, retry
//! policy, request/response bodies, step-wise reply parsing, and a
//! deterministic offline backend.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::json::{self, Number, Scalar, SpecNode};
use crate::promptforge::{Axis, PromptTask, RenderedPrompt};

pub const DEFAULT_MODEL: &str = "gpt-4-0613";
pub const DEFAULT_API_KEY_ENV: &str = "CHARTNL_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub endpoint_url: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub timeout_seconds: u64,
    /// Name of the environment variable holding the key; the key itself is
    /// never part of the config.
    pub api_key_env: String,
    pub backoff_base_ms: u64,
    pub concurrency: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            endpoint_url: "https://api.openai.com".to_string(),
            model_name: DEFAULT_MODEL.to_string(),
            temperature: 0.0,
            max_retries: 3,
            timeout_seconds: 120,
            api_key_env: DEFAULT_API_KEY_ENV.to_string(),
            backoff_base_ms: 1000,
            concurrency: 4,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
    pub total_tokens: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub usage: Usage,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited on all {attempts} attempts")]
    RateLimitExhausted { attempts: u32 },
    #[error("request timed out")]
    Timeout,
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    /// Retryable server-side failure (429 or 5xx); surfaced only when
    /// retries are exhausted on a non-429 status.
    #[error("server returned HTTP {status}")]
    Http { status: u16 },
    #[error("transport error: {0}")]
    Transport(String),
}

impl GatewayError {
    pub fn is_transient(&self) -> bool {
        matches!(self, GatewayError::Http { status } if *status == 429 || *status >= 500)
            || matches!(self, GatewayError::Timeout | GatewayError::Transport(_))
    }
}

/// Maps an HTTP status to an error, or `None` for success.
pub fn status_error(status: u16, body: &str) -> Option<GatewayError> {
    match status {
        200..=299 => None,
        401 | 403 => Some(GatewayError::Auth(format!("HTTP {}", status))),
        429 | 500..=599 => Some(GatewayError::Http { status }),
        _ => Some(GatewayError::MalformedResponse(format!(
            "HTTP {}: {}",
            status,
            body.chars().take(200).collect::<String>()
        ))),
    }
}

/// Exponential backoff, `base · factor^attempt`, with up to +50% jitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackoffPolicy {
    pub base_ms: u64,
    pub factor: u32,
    pub jitter: f64,
}

impl BackoffPolicy {
    pub fn from_config(cfg: &ModelConfig) -> Self {
        BackoffPolicy {
            base_ms: cfg.backoff_base_ms,
            factor: 2,
            jitter: 0.5,
        }
    }

    /// Delay before retry number `attempt` (0-based); `unit` ∈ [0,1).
    pub fn delay_ms(&self, attempt: u32, unit: f64) -> u64 {
        let raw = self.base_ms.saturating_mul((self.factor as u64).saturating_pow(attempt));
        raw.saturating_add((raw as f64 * self.jitter * unit) as u64)
    }
}

/// Runs `op` until it succeeds, fails permanently, or `max_retries` retries
/// are spent. `sleep` receives each backoff delay in milliseconds.
pub fn with_retries<T>(
    policy: &BackoffPolicy,
    max_retries: u32,
    seed: u64,
    mut sleep: impl FnMut(u64),
    mut op: impl FnMut(u32) -> Result<T, GatewayError>,
) -> Result<(T, u32), GatewayError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut attempt = 0;
    loop {
        match op(attempt) {
            Ok(v) => return Ok((v, attempt + 1)),
            Err(e) if e.is_transient() && attempt < max_retries => {
                sleep(policy.delay_ms(attempt, rng.gen::<f64>()));
                attempt += 1;
            }
            Err(GatewayError::Http { status: 429 }) => {
                return Err(GatewayError::RateLimitExhausted { attempts: attempt + 1 })
            }
            Err(e) => return Err(e),
        }
    }
}

fn str_node(s: &str) -> SpecNode {
    SpecNode::Scalar(Scalar::String(s.to_string()))
}

/// `{model, temperature, messages:[{role:"user", content}]}`; no system
/// message is sent.
pub fn chat_request_body(prompt: &RenderedPrompt, cfg: &ModelConfig) -> String {
    let message = SpecNode::Object(alloc::vec![
        ("role".to_string(), str_node("user")),
        ("content".to_string(), str_node(&prompt.text)),
    ]);
    SpecNode::Object(alloc::vec![
        ("model".to_string(), str_node(&cfg.model_name)),
        (
            "temperature".to_string(),
            SpecNode::Scalar(Scalar::Number(Number::Float(cfg.temperature)))
        ),
        ("messages".to_string(), SpecNode::Array(alloc::vec![message])),
    ])
    .to_compact()
}

pub fn parse_chat_response(body: &str) -> Result<Completion, GatewayError> {
    let root = json::parse(body).map_err(|e| GatewayError::MalformedResponse(e.to_string()))?;
    let text = root
        .get("choices")
        .and_then(SpecNode::as_array)
        .and_then(|c| c.first())
        .and_then(|c| c.get("message"))
        .and_then(|m| m.get("content"))
        .and_then(SpecNode::as_str)
        .ok_or_else(|| GatewayError::MalformedResponse("missing choices[0].message.content".into()))?;
    let count = |k: &str| match root.get("usage").and_then(|u| u.get(k)) {
        Some(SpecNode::Scalar(Scalar::Number(Number::Int(i)))) if *i >= 0 => Some(*i as u64),
        _ => None,
    };
    Ok(Completion {
        text: text.to_string(),
        usage: Usage {
            prompt_tokens: count("prompt_tokens"),
            completion_tokens: count("completion_tokens"),
            total_tokens: count("total_tokens"),
        },
        attempts: 1,
    })
}

/// Something that turns a prompt into assistant text.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, prompt: &RenderedPrompt, cfg: &ModelConfig) -> Result<Completion, GatewayError>;
}

/// Offline backend: canned replies by exact prompt text, otherwise a
/// synthesized scaffold answer from [`mock_reply`].
#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    pub canned: BTreeMap<String, String>,
}

impl ChatBackend for MockBackend {
    fn complete(&self, prompt: &RenderedPrompt, _cfg: &ModelConfig) -> Result<Completion, GatewayError> {
        let text = self
            .canned
            .get(&prompt.text)
            .cloned()
            .unwrap_or_else(|| mock_reply(prompt));
        Ok(Completion {
            text,
            usage: Usage::default(),
            attempts: 1,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StepError {
    #[error("reply has no `{0}` section")]
    MissingStep(String),
    #[error("reply section `{0}` is empty")]
    EmptyStep(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepParse {
    /// `(label, body)` in the order requested.
    pub steps: Vec<(String, String)>,
    pub raw: String,
}

impl StepParse {
    pub fn get(&self, number: u32) -> Option<&str> {
        let prefix = format!("Step {}.", number);
        self.steps
            .iter()
            .find(|(l, _)| l == &prefix || l.starts_with(&format!("{} ", prefix)))
            .map(|(_, b)| b.as_str())
    }

    /// Body split on `;`, trimmed, empties dropped.
    pub fn list(&self, number: u32) -> Vec<String> {
        self.get(number).map(split_semicolons).unwrap_or_default()
    }
}

pub fn split_semicolons(s: &str) -> Vec<String> {
    s.split(';')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(String::from)
        .collect()
}

/// `"Step 3. Questions"` → `(3, Some("Questions"))`; `"Step 2."` → `(2, None)`.
fn parse_label(label: &str) -> Option<(u32, Option<&str>)> {
    let rest = label.trim().strip_prefix("Step")?.trim_start();
    let digits = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
    let n = rest[..digits].parse().ok()?;
    let heading = rest[digits..].trim_start_matches(['.', ':']).trim().trim_end_matches(':');
    Some((n, (!heading.is_empty()).then_some(heading)))
}

/// Start of a `Step N.` / `Step N:` line: returns (N, byte offset after the
/// punctuation).
fn step_marker(line: &str) -> Option<(u32, usize)> {
    let lead = line.len() - line.trim_start().len();
    let rest = line[lead..].strip_prefix("Step")?;
    let spaces = rest.len() - rest.trim_start().len();
    let rest2 = &rest[spaces..];
    let digits = rest2.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest2.len());
    if digits == 0 || !matches!(rest2[digits..].chars().next(), Some('.' | ':')) {
        return None;
    }
    let n = rest2[..digits].parse().ok()?;
    Some((n, lead + 4 + spaces + digits + 1))
}

fn strip_heading<'a>(body: &'a str, heading: Option<&str>) -> &'a str {
    let body = body.trim_start();
    if let Some(h) = heading {
        if body.len() >= h.len() && body[..h.len()].eq_ignore_ascii_case(h) {
            let rest = &body[h.len()..];
            return rest.strip_prefix(':').unwrap_or(rest);
        }
        return body;
    }
    // Unknown heading: drop a short `Heading:` prefix on the first line.
    if let Some(colon) = body.find(':') {
        let head = &body[..colon];
        if !head.contains(['\n', '?', ';']) && head.split_whitespace().count() <= 4 {
            return &body[colon + 1..];
        }
    }
    body
}

/// Extracts the requested `Step N.` sections. When the reply repeats the
/// prompt, only the part after the last `##` line is read. Both `Step N.`
/// and `Step N:` are accepted.
pub fn parse_steps(text: &str, expected: &[&str]) -> Result<StepParse, StepError> {
    let answer = match text.rfind("\n##\n") {
        Some(i) => &text[i + 4..],
        None => text.strip_prefix("##\n").unwrap_or(text),
    };
    // (step number, body start, section end)
    let mut sections: Vec<(u32, usize, usize)> = Vec::new();
    let mut offset = 0;
    for line in answer.split_inclusive('\n') {
        if let Some((n, after)) = step_marker(line) {
            if let Some(last) = sections.last_mut() {
                last.2 = offset;
            }
            sections.push((n, offset + after, answer.len()));
        }
        offset += line.len();
    }
    let mut steps = Vec::new();
    for label in expected {
        let (n, heading) = parse_label(label).ok_or_else(|| StepError::MissingStep(label.to_string()))?;
        let &(_, start, end) = sections
            .iter()
            .find(|s| s.0 == n)
            .ok_or_else(|| StepError::MissingStep(label.to_string()))?;
        let body = strip_heading(&answer[start..end], heading).trim();
        if body.is_empty() {
            return Err(StepError::EmptyStep(label.to_string()));
        }
        steps.push((label.to_string(), body.to_string()));
    }
    Ok(StepParse {
        steps,
        raw: text.to_string(),
    })
}

/// Renders `(label, body)` pairs the way the answer scaffolds lay them out.
pub fn render_steps(steps: &[(&str, &str)]) -> String {
    steps
        .iter()
        .map(|(l, b)| format!("{}: {}", l.trim_end_matches(':'), b))
        .collect::<Vec<_>>()
        .join("\n")
}

struct MockField {
    name: String,
    quantitative: bool,
}

fn mock_fields(vl: &str) -> Vec<MockField> {
    let mut out: Vec<MockField> = Vec::new();
    let Ok(root) = json::parse(vl) else { return out };
    crate::spec_model::for_each_view(&root, &mut |view| {
        for (_, def) in view.get("encoding").and_then(SpecNode::as_object).unwrap_or(&[]) {
            if let Some(name) = def.get("field").and_then(SpecNode::as_str) {
                if !out.iter().any(|f| f.name == name) {
                    out.push(MockField {
                        name: name.to_string(),
                        quantitative: def.get("type").and_then(SpecNode::as_str) == Some("quantitative"),
                    });
                }
            }
        }
    });
    out
}

fn mock_mark(vl: &str) -> String {
    let mut mark = None;
    if let Ok(root) = json::parse(vl) {
        crate::spec_model::for_each_view(&root, &mut |view| {
            if mark.is_none() {
                mark = view
                    .get("mark")
                    .and_then(|m| m.as_str().or_else(|| m.get("type").and_then(SpecNode::as_str)))
                    .map(String::from);
            }
        });
    }
    mark.unwrap_or_else(|| "point".to_string())
}

const REGISTER: [[&str; 5]; 4] = [
    ["Hey, so basically", "Okay, so", "Well,", "To put it plainly,", "Formally stated,"],
    ["You know,", "Roughly,", "In short,", "Specifically,", "To state it exactly,"],
    ["In simple words,", "Put simply,", "In general terms,", "Analytically,", "In statistical terms,"],
    ["Honestly, I feel", "I think", "It seems", "The data shows", "Objectively,"],
];

fn register_phrase(axis: Axis, score: u8) -> &'static str {
    let a = Axis::ALL.iter().position(|x| *x == axis).unwrap_or(0);
    REGISTER[a][(score.clamp(1, 5) - 1) as usize]
}

/// Deterministic, well-formed reply for every prompt kind. Used for
/// hermetic runs; content is synthetic.
pub fn mock_reply(prompt: &RenderedPrompt) -> String {
    let sub = |k: &str| prompt.substitutions.get(k).map(String::as_str).unwrap_or("");
    let fields = mock_fields(sub("vl"));
    let names: Vec<&str> = fields.iter().map(|f| f.name.as_str()).collect();
    let first = names.first().copied().unwrap_or("value");
    let second = names.get(1).copied().unwrap_or(first);
    let measure = fields
        .iter()
        .find(|f| f.quantitative)
        .map(|f| f.name.as_str())
        .unwrap_or(first);
    let mark = mock_mark(sub("vl"));
    match prompt.task {
        PromptTask::L1 => format!(
            "Step 1. Composite Views:\n- True/False: False\n- (If True) Type: -\n- Number of plots: 1\n\
             Step 2. Chart Semantics:\n- Data: the provided table\n- Field (Value): {fields}\n- Transform: none\n\
             - Mark: {mark}\n- Chart-Type: {mark} chart\n- Encoding: {first} and {second}\n- Style: default\n\
             - Interaction (e.g., tooltip): none\n\
             Step 3. Level 1 NL Description: A {mark} chart showing {second} against {first}.",
            fields = names.join(", ")
        ),
        PromptTask::L2Feature => format!(
            "Step 1. Features: The spread of {m} values.\n\
             Step 2. Operations: max; average\n\
             Step 3. Questions: What is the maximum {m}?; What is the average {m}?",
            m = measure
        ),
        PromptTask::L2Answer => format!("The answer is derived from the table for: {}", sub("prompt")),
        PromptTask::L2Caption => format!("Level 2 NL Description: {}.", sub("info").replace('\n', "; ")),
        PromptTask::UtteranceInstr => format!(
            "Step 1. Composite Views:\n- True/False: False\n- (If True) Type: -\n- Number of plots: 1\n\
             Step 2. Instructions:\n[View 1]; [Mark]: Use {mark} marks; [Encoding]: Put {first} on x; [Encoding]: Put {second} on y <\n\
             Step 3. Instructions:\n[View 1]; [Mark]: Use {mark} marks; [Encoding]: Put {first} on x; [Encoding]: Put {second} on y <"
        ),
        PromptTask::UtteranceCombine => {
            let fields: Vec<&str> = sub("inst_first_concat")
                .split("Put ")
                .skip(1)
                .filter_map(|s| s.split(" on ").next())
                .collect();
            let a = fields.first().copied().unwrap_or("value");
            let b = fields.get(1).copied().unwrap_or(a);
            format!(
                "View #1:\nStep 1. Primary Information: {b} by {a}\nStep 2. Secondary Information: default styling\n\
                 Step 3. Command: Show {b} by {a}.\nStep 4. Query: {b} by {a}\n\
                 Step 5. Question: How does {b} vary by {a}?"
            )
        }
        PromptTask::Question => format!(
            "Step 1. Decision: Where to focus attention on {m}.\nStep 2. Conclusion: {m} peaks at one {first}.\n\
             Step 3. Specific Value: the largest {m}\nStep 4. Lookup Question: What is the highest {m}?\n\
             Step 5. Visual Attributes: position\nStep 6. Paraphrased Question: Which mark sits highest?\n\
             Step 7. Operations: max; min; difference\n\
             Step 8. Compositional Question: What is the difference between the highest and lowest {m}?\n\
             Step 9. Visual Attributes: position; length\n\
             Step 10. Paraphrased Question: How far apart are the highest and lowest marks?\n\
             Step 11. Open-ended Question: What explains where {m} peaks?",
            m = measure
        ),
        PromptTask::Coding => {
            let words = sub("sent").split_whitespace().count();
            let mood = if sub("sent").trim_end().ends_with('?') { "interrogative" } else { "imperative" };
            let length = if words > 8 { "verbose" } else { "concise" };
            format!("{}; {}; direct phrasing; plain vocabulary; neutral tone", mood, length)
        }
        PromptTask::Paraphrase1 | PromptTask::Paraphrase2 => {
            let scores = [sub("Score"), sub("Score-A"), sub("Score-B")];
            let mut prefix = Vec::new();
            for (dir_key, score) in [("Direction-1", scores[0]), ("Direction-1-1", scores[1]), ("Direction-2-1", scores[2])] {
                let (Some(axis), Ok(score)) = (
                    crate::promptforge::language_axes()
                        .into_iter()
                        .find(|a| a.direction_low == sub(dir_key))
                        .map(|a| a.axis),
                    score.parse::<u8>(),
                ) else {
                    continue;
                };
                prefix.push(register_phrase(axis, score));
            }
            let sentence = sub("Example Sentence");
            let mut chars = sentence.chars();
            let lowered: String = match chars.next() {
                Some(c) => c.to_lowercase().chain(chars).collect(),
                None => String::new(),
            };
            format!("{} {}", prefix.join(" "), lowered)
        }
    }
}
