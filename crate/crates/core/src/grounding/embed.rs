//! Dense text embeddings.

use std::time::Duration;

use serde::Deserialize;

use crate::text::{fnv1a64_seeded, tokenize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbedError {
    #[error("cannot embed empty text")]
    EmptyInput,
    #[error("embedding provider unavailable: {0}")]
    ProviderUnavailable(String),
}

/// A fixed-length real vector with finite components.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    /// Returns `None` if any component is not finite.
    pub fn new(values: Vec<f64>) -> Option<Self> {
        values.iter().all(|v| v.is_finite()).then_some(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Cosine similarity; 0 when either vector is all zeros.
    pub fn cosine(&self, other: &DenseVector) -> f64 {
        let dot: f64 = self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum();
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            0.0
        } else {
            dot / denom
        }
    }
}

pub trait EmbeddingProvider: Send + Sync {
    /// Identifier persisted with an index; a query must be embedded by the
    /// provider that built the index.
    fn id(&self) -> String;
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<DenseVector, EmbedError>;
}

/// Deterministic feature-hashing embedder for hermetic use.
///
/// Each token contributes its whole-word feature and the character
/// trigrams of `<token>`; features are hashed with a seed into `dimension`
/// buckets and the sum is L2-normalized.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dimension: usize,
    seed: u64,
}

impl HashingEmbedder {
    pub const DEFAULT_DIMENSION: usize = 256;
    pub const DEFAULT_SEED: u64 = 0x005e_ed0f_7e47;

    pub fn new(dimension: usize, seed: u64) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self { dimension, seed }
    }

    fn bucket(&self, feature: &str) -> usize {
        (fnv1a64_seeded(self.seed, feature.as_bytes()) % self.dimension as u64) as usize
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DIMENSION, Self::DEFAULT_SEED)
    }
}

/// Character trigrams of `<word>`.
pub(crate) fn padded_trigrams(word: &str) -> Vec<String> {
    let chars: Vec<char> = std::iter::once('<')
        .chain(word.chars())
        .chain(std::iter::once('>'))
        .collect();
    chars.windows(3).map(|w| w.iter().collect()).collect()
}

impl EmbeddingProvider for HashingEmbedder {
    fn id(&self) -> String {
        format!("hashing-trigram-v1/d{}/s{:x}", self.dimension, self.seed)
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<DenseVector, EmbedError> {
        if text.trim().is_empty() {
            return Err(EmbedError::EmptyInput);
        }
        let mut words = tokenize(text);
        if words.is_empty() {
            words.push(text.trim().to_lowercase());
        }
        let mut values = vec![0.0f64; self.dimension];
        for word in &words {
            values[self.bucket(&format!("w:{word}"))] += 1.0;
            for gram in padded_trigrams(word) {
                values[self.bucket(&format!("g:{gram}"))] += 1.0;
            }
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in &mut values {
            *v /= norm;
        }
        Ok(DenseVector(values))
    }
}

/// Remote provider speaking the common `POST {base}/embeddings` JSON protocol
/// (`{"model": .., "input": [..]}` answered by `{"data": [{"embedding": [..]}]}`).
#[derive(Clone)]
pub struct HttpEmbedder {
    base_url: String,
    model: String,
    dimension: usize,
    api_key: Option<String>,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingItem>,
}

#[derive(Deserialize)]
struct EmbeddingItem {
    embedding: Vec<f64>,
}

impl HttpEmbedder {
    /// `api_key_env`, when given, names an environment variable that must be
    /// set; its value is sent as a bearer token.
    pub fn new(
        base_url: impl Into<String>,
        model: impl Into<String>,
        dimension: usize,
        api_key_env: Option<&str>,
        timeout: Duration,
    ) -> Result<Self, EmbedError> {
        let api_key = match api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                EmbedError::ProviderUnavailable(format!("environment variable {var} is not set"))
            })?),
            None => None,
        };
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        Ok(Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            model: model.into(),
            dimension,
            api_key,
            agent,
        })
    }
}

impl EmbeddingProvider for HttpEmbedder {
    fn id(&self) -> String {
        format!("http/{}/d{}", self.model, self.dimension)
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<DenseVector, EmbedError> {
        if text.trim().is_empty() {
            return Err(EmbedError::EmptyInput);
        }
        let unavailable = |m: String| EmbedError::ProviderUnavailable(m);
        let payload = serde_json::json!({ "model": self.model, "input": [text] }).to_string();
        let mut request = self
            .agent
            .post(format!("{}/embeddings", self.base_url))
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = request.send(payload).map_err(|e| unavailable(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| unavailable(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(unavailable(format!("HTTP {status}: {}", body.chars().take(300).collect::<String>())));
        }
        let parsed: EmbeddingResponse =
            serde_json::from_str(&body).map_err(|e| unavailable(format!("bad response: {e}")))?;
        let values = parsed
            .data
            .into_iter()
            .next()
            .ok_or_else(|| unavailable("response contained no embedding".into()))?
            .embedding;
        if values.len() != self.dimension {
            return Err(unavailable(format!(
                "expected dimension {}, got {}",
                self.dimension,
                values.len()
            )));
        }
        DenseVector::new(values).ok_or_else(|| unavailable("non-finite embedding component".into()))
    }
}
