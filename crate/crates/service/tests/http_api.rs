mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use common::*;
use t2s_core::agent::AgentConfig;
use t2s_core::llm::{ActionKind, ScriptedChat};
use t2s_core::tracelab::{Origin, RunLog};
use t2s_service::{ErrorBody, Text2SparqlResponse, PLACEHOLDER_QUERY};
use t2s_testkit::{FixtureEndpoint, BERLIN_POPULATION};

struct Harness {
    endpoint: FixtureEndpoint,
    service: Service,
    _dir: tempfile::TempDir,
}

fn harness(backend: Arc<dyn t2s_core::llm::ChatBackend>, budget: Duration) -> Harness {
    let dir = tempfile::tempdir().unwrap();
    let endpoint = FixtureEndpoint::mini_dbpedia();
    let dataset = dbpedia_dataset(&endpoint, dir.path());
    let agent = AgentConfig {
        extraction_reserve: Duration::from_millis(200),
        ..AgentConfig::default()
    };
    let service = Service::start(vec![dataset], backend, agent, budget, dir.path().join("runs.jsonl"));
    Harness {
        endpoint,
        service,
        _dir: dir,
    }
}

fn ask(h: &Harness, question: &str) -> HttpReply {
    get(&h.service.url(&format!("?question={}&dataset={}", encode(question), encode(DBPEDIA_ID))))
}

#[test]
fn example_request_returns_the_population_query() {
    let h = harness(canonical_controller(Duration::ZERO), Duration::from_secs(30));
    let question = "What is the population of Berlin? 1";
    let r = ask(&h, question);
    assert_eq!(r.status, 200, "{}", r.body);
    assert!(r.warning.is_none());
    let body: Text2SparqlResponse = serde_json::from_str(&r.body).unwrap();
    assert_eq!(body.dataset, DBPEDIA_ID);
    assert_eq!(body.question, question);
    assert_eq!(body.query, population_query(1));

    let rows = client(&h.endpoint).execute(&body.query).unwrap();
    assert_eq!(rows.rows()[0]["population"].lexical(), BERLIN_POPULATION);

    let log = RunLog::load(&h.service.log_path).unwrap();
    assert_eq!(log.records.len(), 1);
    let rec = &log.records[0];
    assert_eq!(Some(rec.run_id.clone()), r.run_id);
    assert_eq!(rec.question, question);
    assert_eq!(rec.dataset_name, "DBpedia");
    assert_eq!(rec.origin, Origin::Stop);
    assert_eq!(rec.final_query, body.query);
    assert_eq!(rec.actions.last(), Some(&ActionKind::Stop));
}

#[test]
fn plus_signs_and_utf8_are_decoded() {
    let h = harness(canonical_controller(Duration::ZERO), Duration::from_secs(30));
    let url = h.service.url(&format!("?dataset={}&question=%C2%BFCu%C3%A1l+es+la+poblaci%C3%B3n%3F+2", encode(DBPEDIA_ID)));
    let body: Text2SparqlResponse = serde_json::from_str(&get(&url).body).unwrap();
    assert_eq!(body.question, "¿Cuál es la población? 2");
    assert_eq!(body.query, population_query(2));
}

#[test]
fn bad_requests_name_the_parameter() {
    let h = harness(canonical_controller(Duration::ZERO), Duration::from_secs(30));
    let cases = [
        (format!("?question=Hi&dataset={}", encode("https://example.org/unknown")), "dataset"),
        (format!("?dataset={}", encode(DBPEDIA_ID)), "question"),
        ("?question=Hi".to_string(), "dataset"),
        (format!("?question=%20%20&dataset={}", encode(DBPEDIA_ID)), "question"),
    ];
    for (query, parameter) in cases {
        let r = get(&h.service.url(&query));
        assert_eq!(r.status, 400, "{query}");
        let body: ErrorBody = serde_json::from_str(&r.body).unwrap();
        assert_eq!(body.parameter.as_deref(), Some(parameter), "{query}");
    }
    assert!(!h.service.log_path.exists());
}

#[test]
fn post_is_not_routed() {
    let h = harness(canonical_controller(Duration::ZERO), Duration::from_secs(30));
    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let resp = agent.post(&h.service.url("")).send("").unwrap();
    assert_eq!(resp.status().as_u16(), 405);
}

#[test]
fn placeholder_when_nothing_is_producible() {
    let backend = Arc::new(ScriptedChat::new(Vec::<String>::new()));
    let h = harness(backend, Duration::from_secs(30));
    let r = ask(&h, "Anything?");
    assert_eq!(r.status, 200);
    assert!(r.warning.is_some());
    let body: Text2SparqlResponse = serde_json::from_str(&r.body).unwrap();
    assert_eq!(body.query, PLACEHOLDER_QUERY);
    let log = RunLog::load(&h.service.log_path).unwrap();
    assert_eq!(log.records[0].origin, Origin::FallbackExtraction);
    assert_eq!(log.records[0].final_query, "");
}

#[test]
fn four_concurrent_requests_do_not_interfere() {
    let h = harness(canonical_controller(Duration::from_millis(40)), Duration::from_secs(30));
    let started = Instant::now();
    let replies: Vec<(usize, HttpReply)> = std::thread::scope(|s| {
        let handles: Vec<_> = (1..=4)
            .map(|i| {
                let h = &h;
                s.spawn(move || (i, ask(h, &format!("Population of Berlin, run {i}"))))
            })
            .collect();
        handles.into_iter().map(|j| j.join().unwrap()).collect()
    });
    // Sequential runs would take at least 4 x 4 x 40 ms.
    assert!(started.elapsed() < Duration::from_millis(640), "{:?}", started.elapsed());

    let mut run_ids = Vec::new();
    for (i, r) in &replies {
        assert_eq!(r.status, 200);
        let body: Text2SparqlResponse = serde_json::from_str(&r.body).unwrap();
        assert_eq!(body.question, format!("Population of Berlin, run {i}"));
        assert_eq!(body.query, population_query(*i));
        run_ids.push(r.run_id.clone().unwrap());
    }
    let log = RunLog::load(&h.service.log_path).unwrap();
    assert_eq!(log.records.len(), 4);
    assert!(log.warnings.is_empty());
    for rec in &log.records {
        let i: usize = rec.question.rsplit(' ').next().unwrap().parse().unwrap();
        assert_eq!(rec.final_query, population_query(i));
        assert_eq!(
            rec.actions,
            [
                ActionKind::SearchEntityByLabel,
                ActionKind::SearchPropertyByLabel,
                ActionKind::ExecuteSparql,
                ActionKind::Stop
            ]
        );
        assert!(run_ids.contains(&rec.run_id));
    }
    run_ids.sort();
    run_ids.dedup();
    assert_eq!(run_ids.len(), 4);
}

#[test]
fn response_arrives_within_the_budget() {
    // The controller never stops and each call is slow.
    let backend: Arc<dyn t2s_core::llm::ChatBackend> =
        Arc::new(t2s_core::llm::ClosureChat(|m: &[t2s_core::llm::ChatMessage]| {
            std::thread::sleep(Duration::from_millis(150));
            Ok(reply("more", "search_entity_by_label", &format!("Berlin {}", steps_so_far(m))))
        }));
    let budget = Duration::from_millis(1200);
    let h = harness(backend, budget);
    let started = Instant::now();
    let r = ask(&h, "Population of Berlin?");
    assert!(started.elapsed() < budget, "{:?}", started.elapsed());
    assert_eq!(r.status, 200);
}
