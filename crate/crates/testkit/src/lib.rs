//! Hermetic HTTP fixtures for the workspace test suites.
//!
//! [`StubServer`] runs a closure-backed HTTP server on an ephemeral local
//! port. [`FixtureEndpoint`] builds on it with an in-memory oxigraph store
//! speaking the SPARQL 1.1 protocol, so the client code under test talks to
//! a real query engine over a real socket.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::thread;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{RawQuery, State};
use axum::http::{HeaderMap, Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::Router;
use oxigraph::io::RdfFormat;
use oxigraph::sparql::results::{QueryResultsFormat, QueryResultsSerializer};
use oxigraph::sparql::{QueryResults, SparqlEvaluator};
use oxigraph::store::Store;
use tokio::sync::oneshot;

/// Turtle source of the DBpedia-shaped fixture graph.
pub const MINI_DBPEDIA_TTL: &str = include_str!("../fixtures/mini_dbpedia.ttl");
/// Turtle source of the corporate fixture graph.
pub const CORPORATE_TTL: &str = include_str!("../fixtures/corporate.ttl");

/// Population literal of `dbr:Berlin` in [`MINI_DBPEDIA_TTL`].
pub const BERLIN_POPULATION: &str = "3610156";

pub const SPARQL_RESULTS_JSON: &str = "application/sparql-results+json";

#[derive(Debug, Clone)]
pub struct StubRequest {
    pub method: String,
    pub path: String,
    pub query: HashMap<String, String>,
    pub headers: HashMap<String, String>,
    pub body: String,
}

impl StubRequest {
    /// Form or query-string parameter, whichever carries it.
    pub fn param(&self, name: &str) -> Option<String> {
        if let Some(v) = self.query.get(name) {
            return Some(v.clone());
        }
        let is_form = self
            .headers
            .get("content-type")
            .is_some_and(|ct| ct.starts_with("application/x-www-form-urlencoded"));
        if is_form {
            return parse_urlencoded(&self.body).remove(name);
        }
        None
    }
}

#[derive(Debug, Clone)]
pub struct StubResponse {
    pub status: u16,
    pub content_type: String,
    pub body: String,
    pub delay: Option<Duration>,
}

impl StubResponse {
    pub fn new(status: u16, content_type: &str, body: impl Into<String>) -> Self {
        Self {
            status,
            content_type: content_type.to_string(),
            body: body.into(),
            delay: None,
        }
    }

    pub fn json(body: impl Into<String>) -> Self {
        Self::new(200, "application/json", body)
    }

    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = Some(delay);
        self
    }
}

type Handler = dyn Fn(StubRequest) -> StubResponse + Send + Sync;

struct ServerState {
    handler: Arc<Handler>,
    hits: Arc<AtomicUsize>,
}

/// A local HTTP server answering every request through a closure.
///
/// The server runs on its own thread and runtime so it can be used from
/// plain blocking tests; it shuts down when dropped.
pub struct StubServer {
    addr: SocketAddr,
    hits: Arc<AtomicUsize>,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<thread::JoinHandle<()>>,
}

impl StubServer {
    pub fn start<F>(handler: F) -> Self
    where
        F: Fn(StubRequest) -> StubResponse + Send + Sync + 'static,
    {
        let hits = Arc::new(AtomicUsize::new(0));
        let state = Arc::new(ServerState {
            handler: Arc::new(handler),
            hits: hits.clone(),
        });
        let (addr_tx, addr_rx) = mpsc::channel();
        let (shutdown_tx, shutdown_rx) = oneshot::channel::<()>();
        let thread = thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
                .expect("stub runtime");
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0")
                    .await
                    .expect("bind stub server");
                addr_tx
                    .send(listener.local_addr().expect("local addr"))
                    .expect("report address");
                let app = Router::new().fallback(dispatch).with_state(state);
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = shutdown_rx.await;
                    })
                    .await
                    .expect("stub server");
            });
        });
        let addr = addr_rx.recv().expect("stub server did not start");
        Self {
            addr,
            hits,
            shutdown: Some(shutdown_tx),
            thread: Some(thread),
        }
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }

    /// Number of requests served so far.
    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        // In-flight delayed handlers may still be sleeping; don't block on them.
        drop(self.thread.take());
    }
}

async fn dispatch(
    State(state): State<Arc<ServerState>>,
    method: Method,
    uri: Uri,
    RawQuery(raw): RawQuery,
    headers: HeaderMap,
    body: Bytes,
) -> Response {
    state.hits.fetch_add(1, Ordering::SeqCst);
    let request = StubRequest {
        method: method.to_string(),
        path: uri.path().to_string(),
        query: raw.as_deref().map(parse_urlencoded).unwrap_or_default(),
        headers: headers
            .iter()
            .filter_map(|(k, v)| Some((k.as_str().to_ascii_lowercase(), v.to_str().ok()?.to_string())))
            .collect(),
        body: String::from_utf8_lossy(&body).into_owned(),
    };
    let handler = state.handler.clone();
    let response = tokio::task::spawn_blocking(move || handler(request))
        .await
        .unwrap_or_else(|e| StubResponse::new(500, "text/plain", format!("stub handler panicked: {e}")));
    if let Some(delay) = response.delay {
        tokio::time::sleep(delay).await;
    }
    let status = StatusCode::from_u16(response.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (status, [("content-type", response.content_type)], response.body).into_response()
}

/// Decodes an `application/x-www-form-urlencoded` string.
pub fn parse_urlencoded(input: &str) -> HashMap<String, String> {
    form_urlencoded::parse(input.as_bytes()).into_owned().collect()
}

/// Evaluates `query` against `store` and renders a SPARQL protocol response.
///
/// Parse errors become `400` with the parser message as the body, graph
/// results become `406` since only the JSON results format is offered.
pub fn sparql_response(store: &Store, query: &str) -> StubResponse {
    let prepared = match SparqlEvaluator::new().parse_query(query) {
        Ok(q) => q,
        Err(e) => return StubResponse::new(400, "text/plain", format!("Parse error: {e}")),
    };
    let results = match prepared.on_store(store).execute() {
        Ok(r) => r,
        Err(e) => return StubResponse::new(500, "text/plain", format!("Evaluation error: {e}")),
    };
    let serializer = QueryResultsSerializer::from_format(QueryResultsFormat::Json);
    let mut buf = Vec::new();
    match results {
        QueryResults::Boolean(value) => {
            if let Err(e) = serializer.serialize_boolean_to_writer(&mut buf, value) {
                return StubResponse::new(500, "text/plain", e.to_string());
            }
        }
        QueryResults::Solutions(solutions) => {
            let vars = solutions.variables().to_vec();
            let mut writer = match serializer.serialize_solutions_to_writer(&mut buf, vars) {
                Ok(w) => w,
                Err(e) => return StubResponse::new(500, "text/plain", e.to_string()),
            };
            for solution in solutions {
                let written = solution
                    .map_err(|e| e.to_string())
                    .and_then(|s| writer.serialize(&s).map_err(|e| e.to_string()));
                if let Err(e) = written {
                    return StubResponse::new(500, "text/plain", e);
                }
            }
            if let Err(e) = writer.finish() {
                return StubResponse::new(500, "text/plain", e.to_string());
            }
        }
        QueryResults::Graph(_) => {
            return StubResponse::new(406, "text/plain", "only application/sparql-results+json is served")
        }
    }
    StubResponse::new(200, SPARQL_RESULTS_JSON, String::from_utf8_lossy(&buf).into_owned())
}

/// Loads Turtle into a fresh in-memory store.
pub fn store_from_turtle(turtle: &str) -> Store {
    let store = Store::new().expect("in-memory store");
    store
        .load_from_reader(RdfFormat::Turtle, turtle.as_bytes())
        .expect("fixture turtle must parse");
    store
}

/// A SPARQL 1.1 protocol endpoint over an in-memory graph.
///
/// Serves `GET /sparql?query=...`, form-encoded `POST /sparql` and
/// `POST /sparql` with an `application/sparql-query` body.
pub struct FixtureEndpoint {
    server: StubServer,
    store: Store,
}

impl FixtureEndpoint {
    pub fn from_turtle(turtle: &str) -> Self {
        Self::with_delay(turtle, None)
    }

    /// Like [`FixtureEndpoint::from_turtle`], but every response is held
    /// back for `delay`.
    pub fn with_delay(turtle: &str, delay: Option<Duration>) -> Self {
        let store = store_from_turtle(turtle);
        let served = store.clone();
        let server = StubServer::start(move |req| {
            let query = if req.method == "POST"
                && req
                    .headers
                    .get("content-type")
                    .is_some_and(|ct| ct.starts_with("application/sparql-query"))
            {
                Some(req.body.clone())
            } else {
                req.param("query")
            };
            let mut response = match query {
                Some(q) => sparql_response(&served, &q),
                None => StubResponse::new(400, "text/plain", "missing query parameter"),
            };
            response.delay = delay;
            response
        });
        Self { server, store }
    }

    pub fn mini_dbpedia() -> Self {
        Self::from_turtle(MINI_DBPEDIA_TTL)
    }

    pub fn corporate() -> Self {
        Self::from_turtle(CORPORATE_TTL)
    }

    pub fn query_url(&self) -> String {
        self.server.url("/sparql")
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn hits(&self) -> usize {
        self.server.hits()
    }

    pub fn triple_count(&self) -> usize {
        self.store.len().expect("store length")
    }
}
