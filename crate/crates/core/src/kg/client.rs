use std::time::Duration;

use ureq::Agent;

use super::results::{parse_results_json, SparqlResultSet};
use super::term::{Iri, RdfTerm};
use crate::MAX_TOTAL_BUDGET;

pub const SPARQL_RESULTS_JSON: &str = "application/sparql-results+json";

/// Longest endpoint message kept in an error value.
const MAX_ERROR_MESSAGE: usize = 2_000;

/// Upper bound on a response body the client will read.
const MAX_BODY_BYTES: u64 = 256 * 1024 * 1024;

/// Number of usage examples returned for a property.
pub const PROPERTY_EXAMPLE_LIMIT: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KgError {
    #[error("SPARQL syntax error: {0}")]
    Syntax(String),
    #[error("SPARQL endpoint timed out after {0:?}")]
    Timeout(Duration),
    #[error("SPARQL endpoint unavailable{}: {message}", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    Transport { status: Option<u16>, message: String },
    #[error("malformed SPARQL results: {0}")]
    MalformedResults(String),
    #[error("empty SPARQL query")]
    EmptyQuery,
}

impl KgError {
    /// Short stable name of the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            KgError::Syntax(_) => "syntax error",
            KgError::Timeout(_) => "timeout",
            KgError::Transport { .. } => "transport error",
            KgError::MalformedResults(_) => "malformed results",
            KgError::EmptyQuery => "empty query",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EndpointConfigError {
    #[error("invalid endpoint URL {0:?}: {1}")]
    Url(String, String),
    #[error("request timeout {0:?} must be positive and below the {MAX_TOTAL_BUDGET:?} total budget")]
    Timeout(Duration),
    #[error("{0} must be at least 1")]
    ZeroCap(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndpointConfig {
    pub query_url: String,
    pub request_timeout: Duration,
    pub max_rows: usize,
    pub max_excerpt_edges: usize,
}

impl EndpointConfig {
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);
    pub const DEFAULT_MAX_ROWS: usize = 100;
    pub const DEFAULT_MAX_EXCERPT_EDGES: usize = 100;

    pub fn new(query_url: impl Into<String>) -> Result<Self, EndpointConfigError> {
        Self {
            query_url: query_url.into(),
            request_timeout: Self::DEFAULT_TIMEOUT,
            max_rows: Self::DEFAULT_MAX_ROWS,
            max_excerpt_edges: Self::DEFAULT_MAX_EXCERPT_EDGES,
        }
        .validated()
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Result<Self, EndpointConfigError> {
        self.request_timeout = timeout;
        self.validated()
    }

    pub fn with_max_rows(mut self, max_rows: usize) -> Result<Self, EndpointConfigError> {
        self.max_rows = max_rows;
        self.validated()
    }

    pub fn with_max_excerpt_edges(mut self, edges: usize) -> Result<Self, EndpointConfigError> {
        self.max_excerpt_edges = edges;
        self.validated()
    }

    pub fn validated(self) -> Result<Self, EndpointConfigError> {
        match url::Url::parse(&self.query_url) {
            Ok(u) if matches!(u.scheme(), "http" | "https") => {}
            Ok(u) => {
                return Err(EndpointConfigError::Url(
                    self.query_url.clone(),
                    format!("unsupported scheme `{}`", u.scheme()),
                ))
            }
            Err(e) => return Err(EndpointConfigError::Url(self.query_url.clone(), e.to_string())),
        }
        if self.request_timeout.is_zero() || self.request_timeout >= MAX_TOTAL_BUDGET {
            return Err(EndpointConfigError::Timeout(self.request_timeout));
        }
        if self.max_rows == 0 {
            return Err(EndpointConfigError::ZeroCap("max_rows"));
        }
        if self.max_excerpt_edges == 0 {
            return Err(EndpointConfigError::ZeroCap("max_excerpt_edges"));
        }
        Ok(self)
    }
}

/// Outgoing edges of one entity.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityExcerpt {
    pub subject: Iri,
    pub edges: Vec<(Iri, RdfTerm)>,
    pub truncated: bool,
}

/// SPARQL 1.1 protocol client.
///
/// Stateless apart from the connection pool inside [`ureq::Agent`], so one
/// client can be shared across concurrent agent runs.
#[derive(Clone)]
pub struct SparqlClient {
    config: EndpointConfig,
    agent: Agent,
}

impl SparqlClient {
    pub fn new(config: EndpointConfig) -> Self {
        let agent: Agent = Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(config.request_timeout))
            .build()
            .into();
        Self { config, agent }
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    /// Runs `query` and caps SELECT rows at `max_rows`.
    pub fn execute(&self, query: &str) -> Result<SparqlResultSet, KgError> {
        self.execute_within(query, None)
    }

    /// Like [`SparqlClient::execute`] with the request timeout additionally
    /// bounded by `deadline`.
    pub fn execute_within(
        &self,
        query: &str,
        deadline: Option<Duration>,
    ) -> Result<SparqlResultSet, KgError> {
        Ok(self.select_all(query, deadline)?.cap_rows(self.config.max_rows))
    }

    /// Runs `query` without applying the row cap.
    pub fn select_all(
        &self,
        query: &str,
        deadline: Option<Duration>,
    ) -> Result<SparqlResultSet, KgError> {
        if query.trim().is_empty() {
            return Err(KgError::EmptyQuery);
        }
        let timeout = deadline
            .map(|d| d.min(self.config.request_timeout))
            .unwrap_or(self.config.request_timeout);
        let sent = self
            .agent
            .post(&self.config.query_url)
            .config()
            .timeout_global(Some(timeout))
            .build()
            .header("Accept", SPARQL_RESULTS_JSON)
            .send_form([("query", query)]);
        let mut response = match sent {
            Ok(r) => r,
            Err(e) => return Err(classify_transport(e, timeout)),
        };
        let status = response.status().as_u16();
        let body = response
            .body_mut()
            .with_config()
            .limit(MAX_BODY_BYTES)
            .read_to_string()
            .map_err(|e| classify_transport(e, timeout))?;
        classify_response(status, &body)
    }

    /// All outgoing edges of `entity`, sorted by predicate then object and
    /// capped at `max_excerpt_edges`.
    pub fn fetch_outgoing_edges(
        &self,
        entity: &Iri,
        deadline: Option<Duration>,
    ) -> Result<EntityExcerpt, KgError> {
        let query = outgoing_edges_query(entity);
        let results = self.select_all(&query, deadline)?;
        let mut edges: Vec<(Iri, RdfTerm)> = results
            .rows()
            .iter()
            .filter_map(|row| {
                let p = row.get("p")?.as_iri()?.clone();
                let o = row.get("o")?.clone();
                Some((p, o))
            })
            .collect();
        edges.sort_by(|(p1, o1), (p2, o2)| {
            p1.cmp(p2)
                .then_with(|| o1.lexical().cmp(o2.lexical()))
                .then_with(|| o1.cmp(o2))
        });
        edges.dedup();
        let truncated = edges.len() > self.config.max_excerpt_edges;
        edges.truncate(self.config.max_excerpt_edges);
        Ok(EntityExcerpt {
            subject: entity.clone(),
            edges,
            truncated,
        })
    }

    /// Up to five `(subject, object)` pairs using `property` as predicate.
    pub fn fetch_property_examples(
        &self,
        property: &Iri,
        deadline: Option<Duration>,
    ) -> Result<Vec<(RdfTerm, RdfTerm)>, KgError> {
        let results = self.select_all(&property_examples_query(property), deadline)?;
        let mut pairs: Vec<(RdfTerm, RdfTerm)> = results
            .rows()
            .iter()
            .filter_map(|row| Some((row.get("s")?.clone(), row.get("o")?.clone())))
            .collect();
        pairs.sort();
        pairs.truncate(PROPERTY_EXAMPLE_LIMIT);
        Ok(pairs)
    }
}

pub fn outgoing_edges_query(entity: &Iri) -> String {
    format!("SELECT ?p ?o WHERE {{ {} ?p ?o }}", entity.to_sparql())
}

pub fn property_examples_query(property: &Iri) -> String {
    format!(
        "SELECT ?s ?o WHERE {{ ?s {} ?o }} LIMIT {PROPERTY_EXAMPLE_LIMIT}",
        property.to_sparql()
    )
}

/// Maps an HTTP status and body onto the result/error channel.
///
/// 2xx bodies must parse as SPARQL JSON results, 400 carries a syntax
/// error message, every other status is a transport failure.
pub fn classify_response(status: u16, body: &str) -> Result<SparqlResultSet, KgError> {
    match status {
        200..=299 => parse_results_json(body).map_err(|e| KgError::MalformedResults(clip(&e))),
        400 => Err(KgError::Syntax(clip(body.trim()))),
        _ => Err(KgError::Transport {
            status: Some(status),
            message: clip(body.trim()),
        }),
    }
}

fn classify_transport(error: ureq::Error, timeout: Duration) -> KgError {
    match error {
        ureq::Error::Timeout(_) => KgError::Timeout(timeout),
        ureq::Error::Io(ref io) if io.kind() == std::io::ErrorKind::TimedOut => KgError::Timeout(timeout),
        other => KgError::Transport {
            status: None,
            message: clip(&other.to_string()),
        },
    }
}

fn clip(s: &str) -> String {
    match s.char_indices().nth(MAX_ERROR_MESSAGE) {
        Some((i, _)) => format!("{}…", &s[..i]),
        None => s.to_string(),
    }
}
