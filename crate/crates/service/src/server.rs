//! `GET /text2sparql`.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use axum::extract::{Query, State};
use axum::http::{HeaderName, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use t2s_core::agent::{run_agent, AgentConfig, AgentError, DatasetRef};
use t2s_core::grounding::{EntityIndex, SchemaIndex};
use t2s_core::kg::{EndpointConfig, SparqlClient};
use t2s_core::llm::{ChatBackend, RemoteChat};
use t2s_core::tracelab::RunLog;

use crate::config::AppConfig;

/// Returned when no query could be produced at all.
pub const PLACEHOLDER_QUERY: &str = "SELECT * WHERE { } LIMIT 0";
pub const WARNING_HEADER: &str = "x-text2sparql-warning";
pub const RUN_ID_HEADER: &str = "x-run-id";

const RESPONSE_MARGIN: Duration = Duration::from_millis(50);
const DEADLINE_WARNING: &str = "time budget exhausted; placeholder returned";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Text2SparqlResponse {
    pub dataset: String,
    pub question: String,
    pub query: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub parameter: Option<String>,
}

pub struct AppState {
    datasets: BTreeMap<String, DatasetRef>,
    backend: Arc<dyn ChatBackend>,
    agent: AgentConfig,
    total_budget: Duration,
    log: RunLog,
    run_prefix: String,
    run_counter: AtomicU64,
}

impl AppState {
    pub fn new(
        datasets: impl IntoIterator<Item = DatasetRef>,
        backend: Arc<dyn ChatBackend>,
        agent: AgentConfig,
        total_budget: Duration,
        log: RunLog,
    ) -> Self {
        let started = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
        Self {
            datasets: datasets.into_iter().map(|d| (d.id.clone(), d)).collect(),
            backend,
            agent,
            total_budget,
            log,
            run_prefix: format!("{:x}", started.as_millis()),
            run_counter: AtomicU64::new(0),
        }
    }

    /// Loads every index and connects the LLM. All failures are reported
    /// together.
    pub fn from_config(config: &AppConfig) -> Result<Self, Vec<String>> {
        let mut problems = Vec::new();
        let embedder: Option<Arc<dyn t2s_core::grounding::EmbeddingProvider>> = match config.embedding.provider() {
            Ok(p) => Some(Arc::from(p)),
            Err(e) => {
                problems.push(format!("embedding provider: {e}"));
                None
            }
        };
        let backend = match config.llm.clone().map(RemoteChat::new) {
            Some(Ok(chat)) => Some(Arc::new(chat) as Arc<dyn ChatBackend>),
            Some(Err(e)) => {
                problems.push(e.to_string());
                None
            }
            None => {
                problems.push("llm section is required".to_string());
                None
            }
        };
        let mut datasets = Vec::new();
        for (url, d) in &config.datasets {
            let at = format!("dataset {url}");
            let client = match EndpointConfig::new(d.endpoint.clone())
                .and_then(|c| c.with_timeout(Duration::from_secs(d.endpoint_timeout_secs)))
            {
                Ok(c) => SparqlClient::new(c),
                Err(e) => {
                    problems.push(format!("{at}: {e}"));
                    continue;
                }
            };
            let schema = match SchemaIndex::load(&d.schema_index) {
                Ok(s) => s,
                Err(e) => {
                    problems.push(format!("{at}: schema index {}: {e}", d.schema_index.display()));
                    continue;
                }
            };
            let Some(embedder) = embedder.clone() else { continue };
            if schema.provider_id() != embedder.id() {
                problems.push(format!(
                    "{at}: schema index was built with embedding provider {} but {} is configured",
                    schema.provider_id(),
                    embedder.id()
                ));
                continue;
            }
            let mut dataset = DatasetRef::new(url.clone(), d.name.clone(), client, Arc::new(schema), embedder)
                .with_default_language(d.default_language.clone());
            if let Some(l) = &d.fixed_language {
                dataset = dataset.with_fixed_language(l.clone());
            }
            for (lang, dir) in &d.entity_indexes {
                match EntityIndex::load(dir) {
                    Ok(idx) => dataset = dataset.with_entity_index(lang.clone(), Arc::new(idx)),
                    Err(e) => problems.push(format!("{at}: entity index {}: {e}", dir.display())),
                }
            }
            datasets.push(dataset);
        }
        match backend {
            Some(backend) if problems.is_empty() => Ok(Self::new(
                datasets,
                backend,
                config.agent.clone(),
                config.total_budget(),
                RunLog::new(&config.log_path),
            )),
            _ => Err(problems),
        }
    }

    pub fn dataset_ids(&self) -> impl Iterator<Item = &str> {
        self.datasets.keys().map(String::as_str)
    }

    fn next_run_id(&self) -> String {
        format!("{}-{}", self.run_prefix, self.run_counter.fetch_add(1, Ordering::Relaxed))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new().route("/text2sparql", get(text2sparql)).with_state(state)
}

fn bad_request(parameter: &str, error: String) -> Response {
    let body = ErrorBody {
        error,
        parameter: Some(parameter.to_string()),
    };
    (StatusCode::BAD_REQUEST, Json(body)).into_response()
}

async fn text2sparql(State(state): State<Arc<AppState>>, Query(params): Query<HashMap<String, String>>) -> Response {
    let received = Instant::now();
    let Some(dataset_id) = params.get("dataset").cloned() else {
        return bad_request("dataset", "missing query parameter \"dataset\"".to_string());
    };
    let Some(question) = params.get("question").cloned() else {
        return bad_request("question", "missing query parameter \"question\"".to_string());
    };
    if question.trim().is_empty() {
        return bad_request("question", "query parameter \"question\" is empty".to_string());
    }
    let Some(dataset) = state.datasets.get(&dataset_id).cloned() else {
        let known: Vec<&str> = state.dataset_ids().collect();
        return bad_request("dataset", format!("unknown dataset {dataset_id:?}; configured: {known:?}"));
    };

    let run_id = state.next_run_id();
    let worker_state = state.clone();
    let worker_question = question.clone();
    let worker_run_id = run_id.clone();
    let worker = tokio::task::spawn_blocking(move || {
        let budget = worker_state.total_budget.saturating_sub(received.elapsed());
        let outcome = run_agent(
            &worker_question,
            &dataset,
            worker_state.backend.as_ref(),
            &worker_state.agent,
            budget,
        );
        if let Ok(o) = &outcome {
            let record = o.to_run_record(&worker_run_id, &dataset.name, &worker_question);
            if let Err(e) = worker_state.log.append(&record) {
                tracing::error!(run_id = %worker_run_id, "could not log run: {e}");
            }
        }
        outcome
    });
    // The agent keeps to its budget when the backends honor their timeouts;
    // this bounds the response time even when they do not.
    let deadline = state.total_budget.saturating_sub(received.elapsed() + RESPONSE_MARGIN);
    let Ok(joined) = tokio::time::timeout(deadline, worker).await else {
        tracing::warn!(run_id = %run_id, "agent still running at the deadline");
        return answer(dataset_id, question, PLACEHOLDER_QUERY.to_string(), &run_id, Some(DEADLINE_WARNING));
    };

    let (query, warning) = match joined {
        Ok(Ok(outcome)) => match outcome.final_query {
            Some(q) => (q, None),
            None => (PLACEHOLDER_QUERY.to_string(), Some("no query could be produced; placeholder returned")),
        },
        Ok(Err(AgentError::EmptyQuestion)) => {
            return bad_request("question", "query parameter \"question\" is empty".to_string());
        }
        Ok(Err(AgentError::ZeroBudget)) => {
            (PLACEHOLDER_QUERY.to_string(), Some("time budget exhausted before the agent started"))
        }
        Err(e) => {
            tracing::error!(run_id = %run_id, "agent task failed: {e}");
            let body = ErrorBody {
                error: "internal error while answering the question".to_string(),
                parameter: None,
            };
            return (StatusCode::INTERNAL_SERVER_ERROR, Json(body)).into_response();
        }
    };
    tracing::info!(run_id = %run_id, elapsed_ms = received.elapsed().as_millis() as u64, "answered");
    answer(dataset_id, question, query, &run_id, warning)
}

fn answer(dataset_id: String, question: String, query: String, run_id: &str, warning: Option<&'static str>) -> Response {
    let mut response = Json(Text2SparqlResponse {
        dataset: dataset_id,
        question,
        query,
    })
    .into_response();
    let headers = response.headers_mut();
    if let Ok(v) = HeaderValue::from_str(run_id) {
        headers.insert(HeaderName::from_static(RUN_ID_HEADER), v);
    }
    if let Some(w) = warning {
        headers.insert(HeaderName::from_static(WARNING_HEADER), HeaderValue::from_static(w));
    }
    response
}

/// Serves until the process is stopped.
pub async fn serve(state: Arc<AppState>, listen: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(listen).await?;
    tracing::info!("listening on http://{}/text2sparql", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
