//! Blocking HTTP clients for OpenAI-compatible chat and embedding
//! endpoints. The API key is read from the environment on every call and
//! is only ever placed in the `Authorization` header.

use std::thread;
use std::time::Duration;

use chartnl_core::diversity::{DiversityError, EmbeddingProvider, VectorSet};
use chartnl_core::gateway::{
    chat_request_body, parse_chat_response, status_error, with_retries, BackoffPolicy, ChatBackend, Completion,
    GatewayError, ModelConfig,
};
use chartnl_core::promptforge::RenderedPrompt;
use reqwest::blocking::Client;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// Reads the key named by `cfg.api_key_env`.
pub fn api_key(cfg: &ModelConfig) -> Result<String, GatewayError> {
    match std::env::var(&cfg.api_key_env) {
        Ok(k) if !k.trim().is_empty() => Ok(k),
        _ => Err(GatewayError::Auth(format!(
            "environment variable {} is not set",
            cfg.api_key_env
        ))),
    }
}

fn endpoint(cfg: &ModelConfig, path: &str) -> String {
    format!("{}{}", cfg.endpoint_url.trim_end_matches('/'), path)
}

fn transport(e: reqwest::Error) -> GatewayError {
    if e.is_timeout() {
        GatewayError::Timeout
    } else {
        // Without the URL: it is already known to the caller and keeps
        // messages short.
        GatewayError::Transport(e.without_url().to_string())
    }
}

/// Jitter seed derived from the request, so retries are reproducible.
fn request_seed(body: &str) -> u64 {
    let h = Sha256::digest(body.as_bytes());
    u64::from_le_bytes(h[..8].try_into().expect("8 bytes"))
}

fn post_json(client: &Client, url: &str, key: &str, body: &str, timeout: Duration) -> Result<String, GatewayError> {
    let resp = client
        .post(url)
        .bearer_auth(key)
        .header(reqwest::header::CONTENT_TYPE, "application/json")
        .timeout(timeout)
        .body(body.to_string())
        .send()
        .map_err(transport)?;
    let status = resp.status().as_u16();
    let text = resp.text().map_err(transport)?;
    log::debug!("POST {} -> {}", url, status);
    match status_error(status, &text) {
        Some(e) => Err(e),
        None => Ok(text),
    }
}

fn post_with_retries(client: &Client, cfg: &ModelConfig, path: &str, body: &str) -> Result<(String, u32), GatewayError> {
    let key = api_key(cfg)?;
    let url = endpoint(cfg, path);
    let timeout = Duration::from_secs(cfg.timeout_seconds);
    with_retries(
        &BackoffPolicy::from_config(cfg),
        cfg.max_retries,
        request_seed(body),
        |ms| thread::sleep(Duration::from_millis(ms)),
        |attempt| {
            if attempt > 0 {
                log::info!("retry {} for {}", attempt, url);
            }
            post_json(client, &url, &key, body, timeout)
        },
    )
}

/// Chat completions over `POST <endpoint>/v1/chat/completions`. Shareable
/// across threads; each call carries its own retry state.
#[derive(Debug, Clone, Default)]
pub struct HttpBackend {
    client: Client,
}

impl HttpBackend {
    pub fn new() -> Self {
        HttpBackend::default()
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, prompt: &RenderedPrompt, cfg: &ModelConfig) -> Result<Completion, GatewayError> {
        let body = chat_request_body(prompt, cfg);
        let (text, attempts) = post_with_retries(&self.client, cfg, "/v1/chat/completions", &body)?;
        let mut completion = parse_chat_response(&text)?;
        completion.attempts = attempts;
        Ok(completion)
    }
}

/// Embeddings over `POST <endpoint>/v1/embeddings`, in batches.
#[derive(Debug, Clone)]
pub struct RemoteEmbeddings {
    client: Client,
    cfg: ModelConfig,
    model: String,
    pub batch_size: usize,
}

impl RemoteEmbeddings {
    pub fn new(cfg: ModelConfig, model: &str) -> Self {
        RemoteEmbeddings {
            client: Client::new(),
            cfg,
            model: model.to_string(),
            batch_size: 64,
        }
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        let body = json!({ "model": self.model, "input": texts }).to_string();
        let (text, _) = post_with_retries(&self.client, &self.cfg, "/v1/embeddings", &body)?;
        parse_embeddings(&text, texts.len())
    }
}

/// `data[i].embedding`, reordered by `data[i].index` when present.
pub fn parse_embeddings(body: &str, expected: usize) -> Result<Vec<Vec<f64>>, GatewayError> {
    let bad = |m: &str| GatewayError::MalformedResponse(m.to_string());
    let root: Value = serde_json::from_str(body).map_err(|e| GatewayError::MalformedResponse(e.to_string()))?;
    let data = root.get("data").and_then(Value::as_array).ok_or_else(|| bad("missing data"))?;
    let mut out: Vec<Option<Vec<f64>>> = vec![None; expected];
    for (pos, item) in data.iter().enumerate() {
        let i = item.get("index").and_then(Value::as_u64).map_or(pos, |i| i as usize);
        let v = item
            .get("embedding")
            .and_then(Value::as_array)
            .and_then(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<f64>>>())
            .ok_or_else(|| bad("embedding is not a number array"))?;
        *out.get_mut(i).ok_or_else(|| bad("embedding index out of range"))? = Some(v);
    }
    out.into_iter()
        .map(|v| v.ok_or_else(|| bad("missing embedding")))
        .collect()
}

impl EmbeddingProvider for RemoteEmbeddings {
    fn embed(&self, texts: &[String]) -> Result<VectorSet, DiversityError> {
        let mut vectors = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.batch_size.max(1)) {
            vectors.extend(self.embed_batch(chunk).map_err(|e| DiversityError::Provider(e.to_string()))?);
        }
        VectorSet::from_vectors(vectors)
    }
}
