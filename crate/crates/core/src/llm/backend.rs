use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::ChatMessage;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LlmError {
    #[error("LLM configuration error: {0}")]
    Config(String),
    #[error("LLM request timed out after {0:?}")]
    Timeout(Duration),
    #[error("LLM transport error: {0}")]
    Transport(String),
    #[error("LLM provider returned HTTP {status}: {body}")]
    Provider { status: u16, body: String },
    #[error("LLM response could not be read: {0}")]
    InvalidResponse(String),
    #[error("scripted LLM has no responses left")]
    ScriptExhausted,
}

/// Connection settings for an OpenAI-compatible chat-completion server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct LlmConfig {
    // Missing strings are reported together by `problems`.
    #[serde(default)]
    pub base_url: String,
    #[serde(default)]
    pub model: String,
    /// Name of the environment variable holding the API key.
    #[serde(default)]
    pub api_key_env_var: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_output_tokens")]
    pub max_output_tokens: u32,
    #[serde(default = "default_request_timeout_secs")]
    pub request_timeout_secs: u64,
}

fn default_max_output_tokens() -> u32 {
    2048
}

fn default_request_timeout_secs() -> u64 {
    120
}

impl LlmConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>, api_key_env_var: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            api_key_env_var: api_key_env_var.into(),
            temperature: 0.0,
            max_output_tokens: default_max_output_tokens(),
            request_timeout_secs: default_request_timeout_secs(),
        }
    }

    pub fn request_timeout(&self) -> Duration {
        Duration::from_secs(self.request_timeout_secs)
    }

    /// Every problem with the configuration, empty when it is usable.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.base_url.trim().is_empty() {
            out.push("llm.baseUrl is required".to_string());
        } else if url::Url::parse(&self.base_url)
            .map(|u| !matches!(u.scheme(), "http" | "https"))
            .unwrap_or(true)
        {
            out.push(format!("llm.baseUrl {:?} is not an http(s) URL", self.base_url));
        }
        if self.model.trim().is_empty() {
            out.push("llm.model is required".to_string());
        }
        if self.api_key_env_var.trim().is_empty() {
            out.push("llm.apiKeyEnvVar is required".to_string());
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            out.push(format!("llm.temperature must be >= 0, got {}", self.temperature));
        }
        if self.max_output_tokens == 0 {
            out.push("llm.maxOutputTokens must be positive".to_string());
        }
        if self.request_timeout_secs == 0 {
            out.push("llm.requestTimeoutSecs must be positive".to_string());
        }
        out
    }
}

pub trait ChatBackend: Send + Sync {
    /// Returns the assistant's reply. `timeout` further limits this call.
    fn complete(&self, messages: &[ChatMessage], timeout: Option<Duration>) -> Result<String, LlmError>;
}

/// Client for `POST {baseUrl}/chat/completions`.
pub struct RemoteChat {
    config: LlmConfig,
    api_key: String,
    agent: ureq::Agent,
}

impl RemoteChat {
    /// Fails without touching the network if the config is invalid or the
    /// API key variable is unset.
    pub fn new(config: LlmConfig) -> Result<Self, LlmError> {
        let problems = config.problems();
        if !problems.is_empty() {
            return Err(LlmError::Config(problems.join("; ")));
        }
        let api_key = std::env::var(&config.api_key_env_var)
            .map_err(|_| LlmError::Config(format!("environment variable {} is not set", config.api_key_env_var)))?;
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(config.request_timeout()))
            .build()
            .into();
        Ok(Self { config, api_key, agent })
    }
}

impl ChatBackend for RemoteChat {
    fn complete(&self, messages: &[ChatMessage], timeout: Option<Duration>) -> Result<String, LlmError> {
        let limit = timeout.map_or(self.config.request_timeout(), |t| t.min(self.config.request_timeout()));
        let payload = serde_json::json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_output_tokens,
        })
        .to_string();
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let result = self
            .agent
            .post(&url)
            .config()
            .timeout_global(Some(limit))
            .build()
            .header("Content-Type", "application/json")
            .header("Authorization", format!("Bearer {}", self.api_key))
            .send(payload);
        let mut response = match result {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Err(LlmError::Timeout(limit)),
            Err(e) => return Err(LlmError::Transport(e.to_string())),
        };
        let status = response.status().as_u16();
        let body = match response.body_mut().with_config().limit(64 * 1024 * 1024).read_to_string() {
            Ok(b) => b,
            Err(ureq::Error::Timeout(_)) => return Err(LlmError::Timeout(limit)),
            Err(e) => return Err(LlmError::Transport(e.to_string())),
        };
        if !(200..300).contains(&status) {
            return Err(LlmError::Provider {
                status,
                body: body.chars().take(500).collect(),
            });
        }
        let value: serde_json::Value =
            serde_json::from_str(&body).map_err(|e| LlmError::InvalidResponse(e.to_string()))?;
        value
            .pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| LlmError::InvalidResponse("no choices[0].message.content".into()))
    }
}

/// Replays fixed replies in order and records every prompt it receives.
#[derive(Default)]
pub struct ScriptedChat {
    replies: Mutex<VecDeque<Result<String, LlmError>>>,
    prompts: Mutex<Vec<Vec<ChatMessage>>>,
}

impl ScriptedChat {
    pub fn new<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        Self::from_results(replies.into_iter().map(|r| Ok(r.into())))
    }

    pub fn from_results(replies: impl IntoIterator<Item = Result<String, LlmError>>) -> Self {
        Self {
            replies: Mutex::new(replies.into_iter().collect()),
            prompts: Mutex::default(),
        }
    }

    pub fn prompts(&self) -> Vec<Vec<ChatMessage>> {
        self.prompts.lock().expect("prompt log poisoned").clone()
    }

    pub fn remaining(&self) -> usize {
        self.replies.lock().expect("script poisoned").len()
    }
}

impl ChatBackend for ScriptedChat {
    fn complete(&self, messages: &[ChatMessage], _timeout: Option<Duration>) -> Result<String, LlmError> {
        self.prompts.lock().expect("prompt log poisoned").push(messages.to_vec());
        self.replies
            .lock()
            .expect("script poisoned")
            .pop_front()
            .unwrap_or(Err(LlmError::ScriptExhausted))
    }
}

/// Computes each reply from the prompt; handy for scripts that must react
/// to observations.
pub struct ClosureChat<F>(pub F);

impl<F> ChatBackend for ClosureChat<F>
where
    F: Fn(&[ChatMessage]) -> Result<String, LlmError> + Send + Sync,
{
    fn complete(&self, messages: &[ChatMessage], _timeout: Option<Duration>) -> Result<String, LlmError> {
        (self.0)(messages)
    }
}
