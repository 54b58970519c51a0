mod common;

use std::path::Path;
use std::process::{Child, Command, Output};
use std::time::{Duration, Instant};

use common::*;
use t2s_core::llm::{ActionKind, ChatMessage};
use t2s_core::tracelab::{Origin, RunLog, RunRecord};
use t2s_service::Text2SparqlResponse;
use t2s_testkit::{FixtureEndpoint, StubResponse, StubServer};

const BIN: &str = env!("CARGO_BIN_EXE_t2s");

fn t2s(args: &[&str]) -> Output {
    let out = Command::new(BIN).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "t2s {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Chat-completions stub that plays the canonical loop.
fn chat_stub() -> StubServer {
    StubServer::start(|req| {
        let body: serde_json::Value = serde_json::from_str(&req.body).unwrap();
        let messages: Vec<ChatMessage> = serde_json::from_value(body["messages"].clone()).unwrap();
        let content = match steps_so_far(&messages) {
            0 => reply("Find Berlin.", "search_entity_by_label", "Berlin"),
            1 => reply("Find the property.", "search_property_by_label", "population"),
            2 => reply("Run it.", "execute_sparql", &population_query(1)),
            _ => reply("Done.", "stop", ""),
        };
        StubResponse::json(serde_json::json!({ "choices": [{ "message": { "role": "assistant", "content": content } }] }).to_string())
    })
}

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn free_port() -> u16 {
    std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

fn write_config(dir: &Path, endpoint: &FixtureEndpoint, chat: &StubServer, extra: &str) -> std::path::PathBuf {
    let config = format!(
        r#"
logPath = "runs.jsonl"
totalBudget = 60
{extra}

[llm]
baseUrl = "{chat}"
model = "stub"
apiKeyEnvVar = "T2S_TEST_KEY"

[agent]
extractionReserve = 5

[datasets."{DBPEDIA_ID}"]
name = "DBpedia"
endpoint = "{endpoint}"
schemaIndex = "schema"
entityIndexes = {{ en = "entities-en", es = "entities-es" }}
"#,
        chat = chat.url("/v1"),
        endpoint = endpoint.query_url(),
    );
    let path = dir.join("t2s.toml");
    std::fs::write(&path, config).unwrap();
    path
}

fn build_indexes(dir: &Path, endpoint: &FixtureEndpoint) {
    let url = endpoint.query_url();
    let out = t2s(&["build-schema-index", "--endpoint", &url, "--out", dir.join("schema").to_str().unwrap()]);
    assert!(stdout(&out).contains("schema documents"));
    for lang in ["en", "es"] {
        let target = dir.join(format!("entities-{lang}"));
        t2s(&["build-entity-index", "--endpoint", &url, "--language", lang, "--out", target.to_str().unwrap()]);
    }
}

#[test]
fn configured_service_answers_and_logs() {
    let dir = tempfile::tempdir().unwrap();
    let endpoint = FixtureEndpoint::mini_dbpedia();
    let chat = chat_stub();
    build_indexes(dir.path(), &endpoint);
    let config = write_config(dir.path(), &endpoint, &chat, "");
    let port = free_port();
    let _server = Server(
        Command::new(BIN)
            .args(["serve", "--config", config.to_str().unwrap(), "--listen", &format!("127.0.0.1:{port}")])
            .env("T2S_TEST_KEY", "secret")
            .spawn()
            .unwrap(),
    );
    let url = format!(
        "http://127.0.0.1:{port}/text2sparql?dataset={}&question={}",
        encode(DBPEDIA_ID),
        encode("What is the population of Berlin?")
    );
    let started = Instant::now();
    let reply = loop {
        match std::panic::catch_unwind(|| get(&url)) {
            Ok(r) => break r,
            Err(_) if started.elapsed() < Duration::from_secs(20) => std::thread::sleep(Duration::from_millis(100)),
            Err(_) => panic!("service did not come up"),
        }
    };
    assert_eq!(reply.status, 200, "{}", reply.body);
    let body: Text2SparqlResponse = serde_json::from_str(&reply.body).unwrap();
    assert_eq!(body.query, population_query(1));
    assert_eq!(chat.hits(), 4);

    let log = RunLog::load(&dir.path().join("runs.jsonl")).unwrap();
    assert_eq!(log.records.len(), 1);
    assert_eq!(log.records[0].origin, Origin::Stop);
}

#[test]
fn startup_fails_fast_on_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let endpoint = FixtureEndpoint::mini_dbpedia();
    let chat = chat_stub();
    let config = write_config(dir.path(), &endpoint, &chat, "");
    let out = Command::new(BIN)
        .args(["serve", "--config", config.to_str().unwrap()])
        .env("T2S_TEST_KEY", "secret")
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    for needle in ["schemaIndex", "entityIndexes.en", "entityIndexes.es"] {
        assert!(err.contains(needle), "{needle} not in {err}");
    }
}

#[test]
fn missing_api_key_stops_startup() {
    let dir = tempfile::tempdir().unwrap();
    let endpoint = FixtureEndpoint::mini_dbpedia();
    let chat = chat_stub();
    build_indexes(dir.path(), &endpoint);
    let config = write_config(dir.path(), &endpoint, &chat, "");
    let out = Command::new(BIN)
        .args(["serve", "--config", config.to_str().unwrap()])
        .env_remove("T2S_TEST_KEY")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("T2S_TEST_KEY"));
    assert_eq!(chat.hits(), 0);
}

fn synthetic_log(path: &Path) {
    use ActionKind::*;
    let log = RunLog::new(path);
    let runs = [
        ("DBpedia", "en", vec![SearchEntityByLabel, ExecuteSparql, Stop], 10.0),
        ("DBpedia", "en", vec![SearchEntityByLabel, SearchPropertyByLabel, ExecuteSparql, ExecuteSparql, Stop], 20.0),
        ("DBpedia", "es", vec![SearchEntityByLabel, ExecuteSparql, Stop], 12.0),
        ("corporate", "en", vec![SearchClassByLabel, GetPropertyExamples, ExecuteSparql, Stop], 30.0),
        ("corporate", "en", vec![SearchClassByLabel, GetKnowledgegraphEntry, ExecuteSparql, ExecuteSparql, ExecuteSparql, Stop], 40.0),
    ];
    for (i, (ds, lang, actions, secs)) in runs.into_iter().enumerate() {
        log.append(&RunRecord::new(format!("r{i}"), ds, "q", lang, actions, secs, Origin::Stop, "ASK {}"))
            .unwrap();
    }
}

#[test]
fn analytics_subcommands_read_the_log() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("runs.jsonl");
    synthetic_log(&log);
    let log = log.to_str().unwrap();

    let summary = stdout(&t2s(&["summarize", "--log", log]));
    assert!(summary.contains("DBpedia-en\t2\t15.000000\t7.071068\t4.000000\t1.414214"), "{summary}");
    assert!(summary.contains("DBpedia-es\t1\t12.000000\t-"), "{summary}");
    let by_ds = stdout(&t2s(&["summarize", "--log", log, "--by-dataset"]));
    assert!(by_ds.lines().any(|l| l.starts_with("corporate\t2\t")));

    let freq = stdout(&t2s(&["freq", "--log", log]));
    assert_eq!(
        freq.lines().next().unwrap(),
        "step\tget_knowledgegraph_entry\tsearch_entity_by_label\tsearch_property_by_label\tsearch_class_by_label\tget_property_examples\texecute_sparql\tstop"
    );
    assert_eq!(freq.lines().nth(1).unwrap(), "1\t0\t3\t0\t2\t0\t0\t0");

    let cumulative = stdout(&t2s(&["cumulative", "--log", log]));
    assert_eq!(cumulative.lines().next().unwrap(), "step\tsearch\tinspect\texecute\tstop");
    assert_eq!(cumulative.lines().last().unwrap(), "6\t6\t2\t8\t5");

    let transitions = stdout(&t2s(&["transitions", "--log", log]));
    assert!(transitions.contains("execute_sparql\tstop\t5\t0.6250"), "{transitions}");

    let ttest = stdout(&t2s(&["ttest", "--a", "100,8.26,3.486250", "--b", "50,9.92,3.515795"]));
    assert!(ttest.contains("t=-2.73"), "{ttest}");
    assert!(ttest.contains("p=0.007"), "{ttest}");
    let grouped = stdout(&t2s(&["ttest", "--a", "DBpedia", "--b", "corporate", "--metric", "time", "--log", log]));
    assert!(grouped.contains("a: n=3 mean=14.0"), "{grouped}");

    let out = dir.path().join("report");
    let files = stdout(&t2s(&["report", "--log", log, "--out", out.to_str().unwrap()]));
    assert_eq!(files.lines().count(), 4);
    for name in ["summary.csv", "frequency.csv", "cumulative.csv", "transitions.csv"] {
        assert!(out.join(name).is_file(), "{name}");
    }
}
