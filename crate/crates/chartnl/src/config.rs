//! Run configuration: a TOML or JSON file merged with command-line flags.
//! Secrets never live here; the API key is read from the environment
//! variable named by `model.api_key_env`.

use std::path::{Path, PathBuf};

use chartnl_core::diversity::EvalOptions;
use chartnl_core::gateway::ModelConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("invalid setting: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricSettings {
    pub span_percentile: f64,
    pub grid: usize,
    pub k: usize,
}

impl Default for MetricSettings {
    fn default() -> Self {
        let d = EvalOptions::default();
        MetricSettings {
            span_percentile: d.span_percentile,
            grid: d.grid,
            k: d.k,
        }
    }
}

impl MetricSettings {
    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            k: self.k,
            span_percentile: self.span_percentile,
            grid: self.grid,
            normalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub model: ModelConfig,
    /// Model used by the remote embedding provider.
    pub embedding_model: String,
    pub metrics: MetricSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            output_dir: None,
            model: ModelConfig::default(),
            embedding_model: "text-embedding-3-small".to_string(),
            metrics: MetricSettings::default(),
        }
    }
}

impl RunConfig {
    /// `.json` files are read as JSON, anything else as TOML.
    pub fn from_path(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let parse_err = |message: String| ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        };
        let cfg: RunConfig = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| parse_err(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let t = self.model.temperature;
        if !(0.0..=2.0).contains(&t) {
            return Err(ConfigError::Invalid(format!("temperature {} outside [0, 2]", t)));
        }
        if self.model.concurrency == 0 {
            return Err(ConfigError::Invalid("concurrency must be at least 1".into()));
        }
        let p = self.metrics.span_percentile;
        if !(0.0..=100.0).contains(&p) {
            return Err(ConfigError::Invalid(format!("span percentile {} outside [0, 100]", p)));
        }
        if self.metrics.grid == 0 || self.metrics.k == 0 {
            return Err(ConfigError::Invalid("grid and k must be positive".into()));
        }
        Ok(())
    }

    /// SHA-256 over the JSON form, hex encoded. Identical settings give
    /// identical digests.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{:02x}", b)).collect()
    }
}
