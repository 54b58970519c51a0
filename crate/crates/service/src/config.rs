//! TOML configuration for the HTTP service.
//!
//! ```toml
//! listenAddress = "0.0.0.0:8000"
//! totalBudget = 600          # seconds per question, at most 600
//! logPath = "runs.jsonl"
//!
//! [llm]
//! baseUrl = "https://api.openai.com/v1"
//! model = "gpt-4.1-mini"
//! apiKeyEnvVar = "OPENAI_API_KEY"
//!
//! [embedding]
//! provider = "hashing"       # or "http" with baseUrl, model, dimension, apiKeyEnvVar
//!
//! [agent]                    # optional overrides of the loop defaults
//! extractionReserve = 60
//!
//! [datasets."https://text2sparql.aksw.org/2025/dbpedia/"]
//! name = "DBpedia"
//! endpoint = "http://localhost:7001/sparql"
//! schemaIndex = "indexes/dbpedia/schema"
//! entityIndexes = { en = "indexes/dbpedia/entities-en", es = "indexes/dbpedia/entities-es" }
//! ```
//!
//! Relative paths are resolved against the directory of the config file.
//! API keys are read from the named environment variables only.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;
use t2s_core::agent::AgentConfig;
use t2s_core::grounding::{EmbeddingProvider, HashingEmbedder, HttpEmbedder};
use t2s_core::llm::LlmConfig;
use t2s_core::MAX_TOTAL_BUDGET;

pub const CONFIG_ENV_VAR: &str = "T2S_CONFIG";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AppConfig {
    #[serde(default = "default_listen_address")]
    pub listen_address: String,
    #[serde(default)]
    pub datasets: BTreeMap<String, DatasetConfig>,
    pub llm: Option<LlmConfig>,
    /// Seconds.
    #[serde(default = "default_total_budget")]
    pub total_budget: f64,
    #[serde(default = "default_log_path")]
    pub log_path: PathBuf,
    #[serde(default)]
    pub agent: AgentConfig,
    #[serde(default)]
    pub embedding: EmbeddingConfig,
}

fn default_listen_address() -> String {
    "127.0.0.1:8000".to_string()
}

fn default_total_budget() -> f64 {
    MAX_TOTAL_BUDGET.as_secs_f64()
}

fn default_log_path() -> PathBuf {
    PathBuf::from("runs.jsonl")
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DatasetConfig {
    /// Name shown to the model, e.g. `DBpedia`.
    pub name: String,
    /// SPARQL query URL.
    pub endpoint: String,
    pub schema_index: PathBuf,
    /// Entity index directories keyed by language tag.
    #[serde(default)]
    pub entity_indexes: BTreeMap<String, PathBuf>,
    #[serde(default = "default_language")]
    pub default_language: String,
    /// Route every question to this language.
    pub fixed_language: Option<String>,
    #[serde(default = "default_endpoint_timeout")]
    pub endpoint_timeout_secs: u64,
}

fn default_language() -> String {
    "en".to_string()
}

fn default_endpoint_timeout() -> u64 {
    60
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "provider", rename_all = "camelCase", deny_unknown_fields)]
pub enum EmbeddingConfig {
    #[serde(rename_all = "camelCase")]
    Hashing {
        #[serde(default = "default_dimension")]
        dimension: usize,
        #[serde(default = "default_seed")]
        seed: u64,
    },
    #[serde(rename_all = "camelCase")]
    Http {
        base_url: String,
        model: String,
        dimension: usize,
        api_key_env_var: Option<String>,
        #[serde(default = "default_embedding_timeout")]
        timeout_secs: u64,
    },
}

fn default_dimension() -> usize {
    HashingEmbedder::DEFAULT_DIMENSION
}

fn default_seed() -> u64 {
    HashingEmbedder::DEFAULT_SEED
}

fn default_embedding_timeout() -> u64 {
    30
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig::Hashing {
            dimension: default_dimension(),
            seed: default_seed(),
        }
    }
}

impl EmbeddingConfig {
    pub fn provider(&self) -> Result<Box<dyn EmbeddingProvider>, String> {
        match self {
            EmbeddingConfig::Hashing { dimension, seed } => Ok(Box::new(HashingEmbedder::new(*dimension, *seed))),
            EmbeddingConfig::Http {
                base_url,
                model,
                dimension,
                api_key_env_var,
                timeout_secs,
            } => HttpEmbedder::new(
                base_url.clone(),
                model.clone(),
                *dimension,
                api_key_env_var.as_deref(),
                Duration::from_secs(*timeout_secs),
            )
            .map(|e| Box::new(e) as Box<dyn EmbeddingProvider>)
            .map_err(|e| e.to_string()),
        }
    }

    fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            EmbeddingConfig::Hashing { dimension, .. } => {
                if *dimension == 0 {
                    out.push("embedding.dimension must be positive".to_string());
                }
            }
            EmbeddingConfig::Http {
                base_url,
                model,
                dimension,
                timeout_secs,
                ..
            } => {
                if !is_http_url(base_url) {
                    out.push(format!("embedding.baseUrl {base_url:?} is not an http(s) URL"));
                }
                if model.trim().is_empty() {
                    out.push("embedding.model is required".to_string());
                }
                if *dimension == 0 {
                    out.push("embedding.dimension must be positive".to_string());
                }
                if *timeout_secs == 0 {
                    out.push("embedding.timeoutSecs must be positive".to_string());
                }
            }
        }
        out
    }
}

#[derive(Debug)]
pub enum ConfigError {
    Io { path: PathBuf, source: std::io::Error },
    Parse(String),
    /// Every problem found, in a stable order.
    Invalid(Vec<String>),
    MissingPath,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io { path, source } => write!(f, "cannot read config {}: {source}", path.display()),
            ConfigError::Parse(m) => write!(f, "config is not valid TOML for this schema: {m}"),
            ConfigError::Invalid(problems) => {
                write!(f, "invalid config ({} problem{}):", problems.len(), if problems.len() == 1 { "" } else { "s" })?;
                for p in problems {
                    write!(f, "\n  - {p}")?;
                }
                Ok(())
            }
            ConfigError::MissingPath => write!(f, "no config file given and {CONFIG_ENV_VAR} is not set"),
        }
    }
}

impl std::error::Error for ConfigError {}

fn is_http_url(s: &str) -> bool {
    url::Url::parse(s).is_ok_and(|u| matches!(u.scheme(), "http" | "https") && u.host().is_some())
}

impl AppConfig {
    pub fn total_budget(&self) -> Duration {
        Duration::try_from_secs_f64(self.total_budget).unwrap_or(Duration::ZERO)
    }

    /// Parses and validates, resolving relative paths against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut config: AppConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.resolve_paths(base_dir);
        let problems = config.problems();
        if problems.is_empty() {
            Ok(config)
        } else {
            Err(ConfigError::Invalid(problems))
        }
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut self.log_path);
        for d in self.datasets.values_mut() {
            resolve(&mut d.schema_index);
            d.entity_indexes.values_mut().for_each(resolve);
        }
    }

    /// Every problem with the configuration; empty when it is usable.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.listen_address.parse::<std::net::SocketAddr>().is_err() {
            out.push(format!("listenAddress {:?} is not a socket address", self.listen_address));
        }
        if !(self.total_budget.is_finite() && self.total_budget > 0.0) {
            out.push(format!("totalBudget must be a positive number of seconds, got {}", self.total_budget));
        } else if self.total_budget > MAX_TOTAL_BUDGET.as_secs_f64() {
            out.push(format!(
                "totalBudget {} s exceeds the ten-minute limit of {} s",
                self.total_budget,
                MAX_TOTAL_BUDGET.as_secs()
            ));
        } else if self.agent.extraction_reserve >= self.total_budget() {
            out.push(format!(
                "agent.extractionReserve ({} s) must be smaller than totalBudget ({} s)",
                self.agent.extraction_reserve.as_secs_f64(),
                self.total_budget
            ));
        }
        if self.agent.max_iterations == 0 {
            out.push("agent.maxIterations must be positive".to_string());
        }
        if self.agent.max_observation_chars < 100 {
            out.push("agent.maxObservationChars must be at least 100".to_string());
        }
        match &self.llm {
            None => out.push("llm section is required".to_string()),
            Some(llm) => out.extend(llm.problems()),
        }
        out.extend(self.embedding.problems());
        if self.datasets.is_empty() {
            out.push("at least one dataset must be configured".to_string());
        }
        for (url, d) in &self.datasets {
            let at = format!("datasets.{url:?}");
            if url::Url::parse(url).is_err() {
                out.push(format!("{at}: dataset identifier is not a URL"));
            }
            if d.name.trim().is_empty() {
                out.push(format!("{at}.name is required"));
            }
            if !is_http_url(&d.endpoint) {
                out.push(format!("{at}.endpoint {:?} is not an http(s) URL", d.endpoint));
            }
            if d.endpoint_timeout_secs == 0 {
                out.push(format!("{at}.endpointTimeoutSecs must be positive"));
            }
            if !d.schema_index.is_dir() {
                out.push(format!("{at}.schemaIndex directory {} does not exist", d.schema_index.display()));
            }
            if d.entity_indexes.is_empty() {
                out.push(format!("{at}.entityIndexes must list at least one language"));
            }
            for (lang, dir) in &d.entity_indexes {
                if !dir.is_dir() {
                    out.push(format!("{at}.entityIndexes.{lang} directory {} does not exist", dir.display()));
                }
            }
        }
        out
    }
}

/// Loads from `path`, or from the file named by `T2S_CONFIG`.
pub fn load_config(path: Option<&Path>) -> Result<AppConfig, ConfigError> {
    let path = match path {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(CONFIG_ENV_VAR).map(PathBuf::from).ok_or(ConfigError::MissingPath)?,
    };
    let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Io {
        path: path.clone(),
        source,
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    AppConfig::from_toml(&text, &base)
}
