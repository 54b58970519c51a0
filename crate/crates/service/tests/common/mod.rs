#![allow(dead_code)]

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use t2s_core::agent::{AgentConfig, DatasetRef};
use t2s_core::grounding::{
    entity_index_from_endpoint, schema_index_from_endpoint, Bm25Params, EntityIndex, HashingEmbedder,
};
use t2s_core::kg::{EndpointConfig, SparqlClient, DEFAULT_PAGE_SIZE};
use t2s_core::llm::{ChatBackend, ChatMessage, ClosureChat, LlmError};
use t2s_core::tracelab::RunLog;
use t2s_service::{router, AppState};
use t2s_testkit::FixtureEndpoint;

pub const DBPEDIA_ID: &str = "https://text2sparql.aksw.org/2025/dbpedia/";
pub const BERLIN: &str = "http://dbpedia.org/resource/Berlin";
pub const POPULATION_TOTAL: &str = "http://dbpedia.org/ontology/populationTotal";

pub fn client(endpoint: &FixtureEndpoint) -> SparqlClient {
    SparqlClient::new(
        EndpointConfig::new(endpoint.query_url())
            .unwrap()
            .with_timeout(Duration::from_secs(10))
            .unwrap(),
    )
}

/// Mini-DBpedia endpoint with schema and en/es entity indexes under `dir`.
pub fn dbpedia_dataset(endpoint: &FixtureEndpoint, dir: &std::path::Path) -> DatasetRef {
    let client = client(endpoint);
    let embedder = Arc::new(HashingEmbedder::default());
    let schema =
        schema_index_from_endpoint(&client, embedder.as_ref(), Bm25Params::default(), DEFAULT_PAGE_SIZE).unwrap();
    let mut dataset = DatasetRef::new(DBPEDIA_ID, "DBpedia", client.clone(), Arc::new(schema), embedder);
    for lang in ["en", "es"] {
        let target = dir.join(format!("entities-{lang}"));
        entity_index_from_endpoint(&client, Some(lang), &target, DEFAULT_PAGE_SIZE).unwrap();
        dataset = dataset.with_entity_index(lang, Arc::new(EntityIndex::load(&target).unwrap()));
    }
    dataset
}

pub fn population_query(limit: usize) -> String {
    format!("SELECT ?population WHERE {{ <{BERLIN}> <{POPULATION_TOTAL}> ?population }} LIMIT {limit}")
}

pub fn reply(thought: &str, action: &str, argument: &str) -> String {
    format!("Thought: {thought}\nAction: {action}({argument})")
}

pub fn question_of(messages: &[ChatMessage]) -> String {
    messages
        .iter()
        .flat_map(|m| m.content.lines())
        .find_map(|l| l.strip_prefix("User Question: "))
        .unwrap_or_default()
        .to_string()
}

pub fn steps_so_far(messages: &[ChatMessage]) -> usize {
    messages.last().map_or(0, |m| m.content.matches("\nObservation: ").count())
}

/// A stateless controller that follows the canonical loop. The executed
/// query's LIMIT is the number at the end of the question, so concurrent
/// runs can be told apart.
pub fn canonical_controller(delay: Duration) -> Arc<dyn ChatBackend> {
    Arc::new(ClosureChat(move |messages: &[ChatMessage]| -> Result<String, LlmError> {
        std::thread::sleep(delay);
        let question = question_of(messages);
        let tag: usize = question
            .rsplit(|c: char| !c.is_ascii_digit())
            .find(|s| !s.is_empty())
            .and_then(|s| s.parse().ok())
            .unwrap_or(1);
        Ok(match steps_so_far(messages) {
            0 => reply("Find Berlin.", "search_entity_by_label", "Berlin"),
            1 => reply("Find the property.", "search_property_by_label", "population"),
            2 => reply("Run it.", "execute_sparql", &population_query(tag)),
            _ => reply("Done.", "stop", ""),
        })
    }))
}

/// A running service on an ephemeral port.
pub struct Service {
    pub addr: SocketAddr,
    pub log_path: std::path::PathBuf,
    runtime: tokio::runtime::Runtime,
}

impl Service {
    pub fn start(
        datasets: Vec<DatasetRef>,
        backend: Arc<dyn ChatBackend>,
        agent: AgentConfig,
        budget: Duration,
        log_path: std::path::PathBuf,
    ) -> Self {
        let state = Arc::new(AppState::new(datasets, backend, agent, budget, RunLog::new(&log_path)));
        let runtime = tokio::runtime::Builder::new_multi_thread().worker_threads(4).enable_all().build().unwrap();
        let listener = runtime.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
        let addr = listener.local_addr().unwrap();
        runtime.spawn(async move { axum::serve(listener, router(state)).await });
        Self {
            addr,
            log_path,
            runtime,
        }
    }

    pub fn url(&self, query: &str) -> String {
        format!("http://{}/text2sparql{query}", self.addr)
    }

    pub fn runtime(&self) -> &tokio::runtime::Runtime {
        &self.runtime
    }
}

pub struct HttpReply {
    pub status: u16,
    pub body: String,
    pub warning: Option<String>,
    pub run_id: Option<String>,
}

pub fn get(url: &str) -> HttpReply {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(60)))
        .build()
        .into();
    let mut resp = agent.get(url).call().unwrap();
    let header = |name: &str| resp.headers().get(name).and_then(|v| v.to_str().ok()).map(str::to_string);
    let warning = header("x-text2sparql-warning");
    let run_id = header("x-run-id");
    HttpReply {
        status: resp.status().as_u16(),
        body: resp.body_mut().read_to_string().unwrap(),
        warning,
        run_id,
    }
}

/// `application/x-www-form-urlencoded` encoding of one value.
pub fn encode(value: &str) -> String {
    let mut out = String::new();
    for b in value.bytes() {
        match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => out.push(b as char),
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out
}
