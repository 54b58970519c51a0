//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p t2s-service --test acceptance`.

mod common;

use std::collections::{BTreeMap, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use common::*;
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::TestRunner;
use t2s_core::agent::{run_agent, AgentConfig, AgentOutcome, DatasetRef};
use t2s_core::grounding::{
    build_entity_index, rrf_fuse, term_id, EntityIndex, EntityIndexEntry, KindFilter, DESCRIPTION_WEIGHT,
    NAME_WEIGHT,
};
use t2s_core::kg::Iri;
use t2s_core::llm::{parse_controller_output, ActionInvocation, ActionKind, ChatBackend, ChatMessage, LlmError};
use t2s_core::tracelab::{
    action_frequency_by_step, cumulative_by_category, transition_counts, welch_t_test, CategoryMap, GroupStats,
    Origin, RunLog, RunRecord,
};
use t2s_service::Text2SparqlResponse;
use t2s_testkit::{FixtureEndpoint, BERLIN_POPULATION};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        let ok = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    })
}

// ---------------------------------------------------------------- 1, 2

fn welch(a: (usize, f64, f64), b: (usize, f64, f64), t: (f64, f64), p: (f64, f64)) -> Outcome {
    let started = Instant::now();
    let r = welch_t_test(GroupStats::new(a.0, a.1, a.2), GroupStats::new(b.0, b.1, b.2)).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    ensure!((r.t - t.0).abs() <= t.1, "t = {} not within {} of {}", r.t, t.1, t.0);
    ensure!((r.p_two_tailed - p.0).abs() <= p.1, "p = {} not within {} of {}", r.p_two_tailed, p.1, p.0);
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("t = {:.4}, df = {:.2}, p = {:.5}", r.t, r.df, r.p_two_tailed))
}

fn criterion_1() -> Outcome {
    welch((100, 8.26, 3.486250), (50, 9.92, 3.515795), (-2.734, 0.005), (0.00744, 0.0005))
}

fn criterion_2() -> Outcome {
    welch((100, 51.44, 29.395018), (50, 59.62, 25.210858), (-1.770, 0.005), (0.079, 0.002))
}

// ---------------------------------------------------------------- 3

fn rrf_oracle(rankings: &[Vec<String>], k: u128) -> Vec<String> {
    let mut ranks: BTreeMap<String, Vec<u128>> = BTreeMap::new();
    for list in rankings {
        for (i, key) in list.iter().enumerate() {
            ranks.entry(key.clone()).or_default().push(i as u128 + 1);
        }
    }
    // Exact Σ 1/(k + r) as a fraction.
    let mut scored: Vec<(String, (u128, u128))> = ranks
        .into_iter()
        .map(|(key, rs)| (key, rs.iter().fold((0, 1), |(n, d), r| (n * (k + r) + d, d * (k + r)))))
        .collect();
    scored.sort_by(|(ka, (a, b)), (kc, (c, d))| (c * b).cmp(&(a * d)).then_with(|| ka.cmp(kc)));
    scored.into_iter().map(|(key, _)| key).collect()
}

fn criterion_3() -> Outcome {
    let started = Instant::now();
    let list = Just((0..10).map(|i| format!("http://ex.org/d{i}")).collect::<Vec<_>>())
        .prop_shuffle()
        .prop_flat_map(|docs| (0..=docs.len()).prop_map(move |n| docs[..n].to_vec()));
    let strategy = proptest::collection::vec(list, 1..=3);
    runner(1000)
        .run(&strategy, |rankings| {
            let fused: Vec<String> = rrf_fuse(&rankings, 60.0).into_iter().map(|(k, _)| k).collect();
            prop_assert_eq!(fused, rrf_oracle(&rankings, 60));
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!("1000 instances equal the exact oracle in {elapsed:.2?}"))
}

// ---------------------------------------------------------------- 4

const VOCAB: &[&str] = &["berlin", "wall", "city", "germany", "capital", "river", "paris", "tower", "the", "of", "old"];

#[derive(Debug, Clone)]
struct Doc {
    name: Vec<&'static str>,
    desc: Vec<&'static str>,
}

/// Field-weighted BM25 (k1 = 1.2, b = 0.75) over every document.
fn bm25_oracle(docs: &[Doc], query: &[&str]) -> Vec<(usize, f64)> {
    let (k1, b) = (1.2f64, 0.75f64);
    let n = docs.len() as f64;
    let avg_name = docs.iter().map(|d| d.name.len()).sum::<usize>() as f64 / n;
    let avg_desc = docs.iter().map(|d| d.desc.len()).sum::<usize>() as f64 / n;
    let tf = |field: &[&str], t: &str| field.iter().filter(|w| **w == t).count() as f64;
    let idf = |df: f64| (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
    let weight = |idf: f64, tf: f64, len: f64, avg: f64| {
        if tf == 0.0 {
            return 0.0;
        }
        let rel = if avg > 0.0 { len / avg } else { 1.0 };
        idf * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * rel))
    };
    let mut terms = query.to_vec();
    terms.sort_by_key(|t| term_id(t));
    terms.dedup();
    let mut scores: Vec<Option<f64>> = vec![None; docs.len()];
    for t in terms {
        let df_name = docs.iter().filter(|d| tf(&d.name, t) > 0.0).count() as f64;
        let df_desc = docs.iter().filter(|d| tf(&d.desc, t) > 0.0).count() as f64;
        for (i, d) in docs.iter().enumerate() {
            let (tn, td) = (tf(&d.name, t), tf(&d.desc, t));
            if tn == 0.0 && td == 0.0 {
                continue;
            }
            let s = NAME_WEIGHT * weight(idf(df_name), tn, d.name.len() as f64, avg_name)
                + DESCRIPTION_WEIGHT * weight(idf(df_desc), td, d.desc.len() as f64, avg_desc);
            *scores[i].get_or_insert(0.0) += s;
        }
    }
    let mut ranked: Vec<(usize, f64)> =
        scores.into_iter().enumerate().filter_map(|(i, s)| s.filter(|s| *s > 0.0).map(|s| (i, s))).collect();
    ranked.sort_by(|(a, x), (b, y)| y.total_cmp(x).then(a.cmp(b)));
    ranked
}

fn doc_iri(i: usize) -> Iri {
    Iri::parse(&format!("http://ex.org/e{i:03}")).unwrap()
}

fn criterion_4() -> Outcome {
    let started = Instant::now();
    let word = proptest::sample::select(VOCAB);
    let doc = (proptest::collection::vec(word.clone(), 1..4), proptest::collection::vec(word, 0..8))
        .prop_map(|(name, desc)| Doc { name, desc });
    let query_word = proptest::sample::select([VOCAB, &["absent"]].concat());
    let strategy = (proptest::collection::vec(doc, 1..=50), proptest::collection::vec(query_word, 1..=5));
    runner(1000)
        .run(&strategy, |(docs, query)| {
            let dir = tempfile::tempdir().unwrap();
            let target = dir.path().join("idx");
            let entries = docs.iter().enumerate().map(|(i, d)| {
                EntityIndexEntry::new(doc_iri(i), d.name.join(" "), (!d.desc.is_empty()).then(|| d.desc.join(" ")))
            });
            build_entity_index(&target, None, entries).unwrap();
            let got = EntityIndex::load(&target).unwrap().search(&query.join(" "), usize::MAX).unwrap();
            let want = bm25_oracle(&docs, &query);
            let got: Vec<(Iri, f64)> = got.into_iter().map(|m| (m.iri, m.score)).collect();
            let want: Vec<(Iri, f64)> = want.into_iter().map(|(i, s)| (doc_iri(i), s)).collect();
            prop_assert_eq!(got, want);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!("1000 corpora rank identically to the full scan in {elapsed:.2?}"))
}

// ---------------------------------------------------------------- 5

struct World {
    endpoint: FixtureEndpoint,
    dataset: DatasetRef,
    dir: tempfile::TempDir,
}

fn world() -> World {
    let dir = tempfile::tempdir().unwrap();
    let endpoint = FixtureEndpoint::mini_dbpedia();
    let dataset = dbpedia_dataset(&endpoint, dir.path());
    World { endpoint, dataset, dir }
}

fn criterion_5(w: &World) -> Outcome {
    let hits = w
        .dataset
        .schema_index
        .hybrid_search("population", w.dataset.embedder.as_ref(), Some(KindFilter::Properties), 10, Default::default())
        .map_err(|e| e.to_string())?;
    let first = hits.matches.first().ok_or("no property hits")?;
    ensure!(first.iri.as_str() == POPULATION_TOTAL, "first property is {}", first.iri);
    let entities = w.dataset.entity_indexes["en"].search("Berlin", 10).map_err(|e| e.to_string())?;
    let first = entities.first().ok_or("no entity hits")?;
    ensure!(first.iri.as_str() == BERLIN, "first entity is {}", first.iri);
    Ok(format!("population -> <{POPULATION_TOTAL}>, Berlin -> <{BERLIN}>"))
}

// ---------------------------------------------------------------- 6, 7

/// Controller replies in order; extraction prompts get `extraction`.
struct Script {
    replies: Mutex<VecDeque<String>>,
    extraction: Option<String>,
    prompts: Mutex<Vec<Vec<ChatMessage>>>,
}

impl Script {
    fn new(replies: Vec<String>, extraction: Option<&str>) -> Self {
        Self {
            replies: Mutex::new(replies.into()),
            extraction: extraction.map(str::to_string),
            prompts: Mutex::default(),
        }
    }
}

fn is_extraction(messages: &[ChatMessage]) -> bool {
    messages.last().is_some_and(|m| m.content.ends_with("the SPARQL only:"))
}

impl ChatBackend for Script {
    fn complete(&self, messages: &[ChatMessage], _: Option<Duration>) -> Result<String, LlmError> {
        self.prompts.lock().unwrap().push(messages.to_vec());
        if is_extraction(messages) {
            return self.extraction.clone().ok_or(LlmError::ScriptExhausted);
        }
        self.replies.lock().unwrap().pop_front().ok_or(LlmError::ScriptExhausted)
    }
}

fn agent_config() -> AgentConfig {
    AgentConfig {
        extraction_reserve: Duration::from_millis(500),
        ..AgentConfig::default()
    }
}

fn run(w: &World, replies: Vec<String>, extraction: Option<&str>) -> AgentOutcome {
    let script = Script::new(replies, extraction);
    run_agent("What is the population of Berlin?", &w.dataset, &script, &agent_config(), Duration::from_secs(30))
        .unwrap()
}

fn canonical() -> Vec<String> {
    let q = population_query(1);
    vec![
        reply("Find Berlin.", "search_entity_by_label", "Berlin"),
        reply("Find the property.", "search_property_by_label", "population"),
        reply("Run it.", "execute_sparql", &q),
        reply("Done.", "stop", ""),
    ]
}

fn criterion_6(w: &World) -> Outcome {
    let started = Instant::now();
    let o = run(w, canonical(), None);
    let elapsed = started.elapsed();
    ensure!(o.origin == Origin::Stop, "origin {:?}", o.origin);
    ensure!(o.trace.len() <= 15, "trace length {}", o.trace.len());
    let q = o.final_query.clone().ok_or("no final query")?;
    let result = client(&w.endpoint).execute(&q).map_err(|e| e.to_string())?;
    let value = result.rows().first().and_then(|r| r.get("population")).map(|t| t.lexical().to_string());
    ensure!(value.as_deref() == Some(BERLIN_POPULATION), "query returned {value:?}");
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!("origin=stop, {} steps, population {BERLIN_POPULATION}, {elapsed:.2?}", o.trace.len()))
}

fn search_reply(i: usize) -> impl Strategy<Value = String> {
    prop_oneof![
        Just(reply("s", "search_entity_by_label", &format!("Berlin {i}"))),
        Just(reply("p", "search_property_by_label", &format!("population {i}"))),
        Just(reply("c", "search_class_by_label", &format!("city {i}"))),
        Just(reply("x", "execute_sparql", &format!("ASK {{ ?s ?p {i} }}"))),
        Just(reply("g", "get_knowledgegraph_entry", &format!("http://dbpedia.org/resource/X{i}"))),
    ]
}

fn criterion_7(w: &World) -> Outcome {
    let never = (15usize..40).prop_flat_map(|n| (0..n).map(search_reply).collect::<Vec<_>>());
    runner(16)
        .run(&never, |replies| {
            let o = run(w, replies, Some("ASK { ?s ?p ?o }"));
            prop_assert_eq!(o.iterations, 15);
            prop_assert_eq!(o.origin, Origin::FallbackExtraction);
            Ok(())
        })
        .map_err(|e| format!("never-stopping: {e}"))?;

    let premature = (0usize..6).prop_flat_map(|n| {
        (0..n).map(|i| Just(reply("s", "search_entity_by_label", &format!("Berlin {i}")))).collect::<Vec<_>>()
    });
    runner(16)
        .run(&premature, |mut replies| {
            let q = population_query(1);
            replies.extend([reply("stop", "stop", ""), reply("run", "execute_sparql", &q), reply("stop", "stop", "")]);
            let o = run(w, replies, None);
            prop_assert_eq!(o.origin, Origin::Stop);
            prop_assert_eq!(o.trace.iter().filter(|s| s.rejected).count(), 1);
            prop_assert_eq!(o.final_query, Some(q));
            Ok(())
        })
        .map_err(|e| format!("premature stop: {e}"))?;

    let repeated = (0usize..5, 2usize..6);
    runner(16)
        .run(&repeated, |(which, times)| {
            let one = [
                reply("s", "search_entity_by_label", "Berlin"),
                reply("p", "search_property_by_label", "population"),
                reply("c", "search_class_by_label", "city"),
                reply("x", "execute_sparql", "ASK { ?s ?p ?o }"),
                reply("g", "get_knowledgegraph_entry", BERLIN),
            ][which]
                .clone();
            let mut replies = vec![one; times];
            replies.extend([reply("run", "execute_sparql", &population_query(1)), reply("stop", "stop", "")]);
            let o = run(w, replies, None);
            prop_assert_eq!(o.trace.iter().filter(|s| s.was_repeat_intercepted).count(), times - 1);
            Ok(())
        })
        .map_err(|e| format!("repeat interception: {e}"))?;
    Ok("never-stopping, premature-stop and identical-action scripts hold (48 cases)".to_string())
}

// ---------------------------------------------------------------- 8

fn criterion_8(w: &World) -> Outcome {
    let log_path = w.dir.path().join("service-runs.jsonl");
    let service = Service::start(
        vec![w.dataset.clone()],
        canonical_controller(Duration::from_millis(20)),
        agent_config(),
        Duration::from_secs(30),
        log_path.clone(),
    );
    let ask = |question: &str, dataset: &str| {
        get(&service.url(&format!("?question={}&dataset={}", encode(question), encode(dataset))))
    };

    let question = "Who is the mayor of Berlin? 1";
    let r = ask(question, DBPEDIA_ID);
    ensure!(r.status == 200, "status {} body {}", r.status, r.body);
    let body: Text2SparqlResponse = serde_json::from_str(&r.body).map_err(|e| e.to_string())?;
    ensure!(body.dataset == DBPEDIA_ID && body.question == question, "echo mismatch: {body:?}");
    ensure!(!body.query.trim().is_empty(), "empty query");

    let r = ask(question, "https://example.org/unknown");
    ensure!(r.status == 400, "unknown dataset gave {}", r.status);

    let replies: Vec<(usize, HttpReply)> = std::thread::scope(|s| {
        let ask = &ask;
        let handles: Vec<_> = (1..=4)
            .map(|i| s.spawn(move || (i, ask(&format!("Population of Berlin, run {i}"), DBPEDIA_ID))))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for (i, r) in &replies {
        ensure!(r.status == 200, "concurrent request {i} gave {}", r.status);
        let body: Text2SparqlResponse = serde_json::from_str(&r.body).map_err(|e| e.to_string())?;
        ensure!(body.question == format!("Population of Berlin, run {i}"), "question mixed up: {body:?}");
        ensure!(body.query == population_query(*i), "query mixed up for {i}: {}", body.query);
    }
    let log = RunLog::load(&log_path).map_err(|e| e.to_string())?;
    ensure!(log.records.len() == 5, "{} records logged", log.records.len());
    let mut ids: Vec<&str> = log.records.iter().map(|r| r.run_id.as_str()).collect();
    ids.sort();
    ids.dedup();
    ensure!(ids.len() == 5, "run ids are not distinct");
    for rec in &log.records[1..] {
        let i: usize = rec.question.rsplit(' ').next().unwrap_or("").parse().map_err(|_| "bad question")?;
        ensure!(rec.final_query == population_query(i), "trace of run {i} holds {}", rec.final_query);
        ensure!(rec.step_count == 4, "run {i} logged {} steps", rec.step_count);
    }
    drop(service);
    Ok("200 with echoed inputs, 400 for unknown dataset, 4 concurrent runs isolated".to_string())
}

// ---------------------------------------------------------------- 9

fn balanced_argument() -> impl Strategy<Value = String> {
    let atom = proptest::sample::select(vec![
        "?x", "?count", "<http://ex.org/a>", "dbo:populationTotal", "SELECT", "WHERE", "{", "}", ".", "FILTER",
        "COUNT", "\"Berlin\"@en", "LIMIT 10", "\n", "\n  ", ";", "*", ",",
    ])
    .prop_map(str::to_string);
    let tree = atom.prop_recursive(4, 40, 6, |inner| {
        prop_oneof![
            proptest::collection::vec(inner.clone(), 1..6).prop_map(|v| v.join(" ")),
            proptest::collection::vec(inner, 0..4).prop_map(|v| format!("({})", v.join(" "))),
        ]
    });
    let head = proptest::sample::select(vec!["SELECT ?x WHERE {", "ASK {", "Berlin", "population"]);
    let tail = proptest::sample::select(vec!["}", "LIMIT 5", "total", "(1)"]);
    (head, tree, tail).prop_map(|(h, body, t)| format!("{h} {body} {t}"))
}

fn criterion_9() -> Outcome {
    let kind = proptest::sample::select(ActionKind::ALL.to_vec());
    let thought = "[A-Za-z][A-Za-z ,.?']{0,60}".prop_map(|s| s.trim().to_string());
    let mut multiline = 0usize;
    let mut nested = 0usize;
    runner(1000)
        .run(&(thought, kind, balanced_argument()), |(t, k, arg)| {
            let invocation = ActionInvocation::new(k, arg);
            let text = format!("Thought: {t}\nAction: {invocation}");
            let parsed = parse_controller_output(&text).map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert_eq!(parsed.thought, t);
            prop_assert_eq!(parsed.action, invocation);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    // Coverage of the generator itself.
    let mut rng = TestRunner::deterministic();
    for _ in 0..1000 {
        let a = balanced_argument().new_tree(&mut rng).unwrap().current();
        multiline += usize::from(a.contains('\n'));
        nested += usize::from(a.contains("(("));
    }
    ensure!(multiline > 0 && nested > 0, "generator lacks multi-line ({multiline}) or nested ({nested}) cases");
    Ok(format!("1000 outputs round-trip ({multiline}/1000 multi-line, {nested}/1000 nested in a sample)"))
}

// ---------------------------------------------------------------- 10

fn random_log() -> impl Strategy<Value = Vec<RunRecord>> {
    let kind = proptest::sample::select(ActionKind::ALL.to_vec());
    proptest::collection::vec((proptest::collection::vec(kind, 0..16), 0.01f64..600.0), 0..30).prop_map(|runs| {
        runs.into_iter()
            .enumerate()
            .map(|(i, (actions, secs))| {
                RunRecord::new(format!("r{i}"), "d", "q", "en", actions, secs, Origin::Stop, "ASK {}")
            })
            .collect()
    })
}

fn analytics_match_oracles(records: &[RunRecord]) -> Result<(), TestCaseError> {
    let freq = action_frequency_by_step(records);
    let cats = CategoryMap::default();
    let cumulative = cumulative_by_category(records, &cats);
    let transitions = transition_counts(records);
    let longest = records.iter().map(|r| r.actions.len()).max().unwrap_or(0);
    for step in 1..=longest {
        for k in ActionKind::ALL {
            let want = records.iter().filter(|r| r.actions.get(step - 1) == Some(&k)).count() as u64;
            prop_assert_eq!(freq.get(step, k), want);
        }
        for c in cats.categories() {
            let want = records
                .iter()
                .flat_map(|r| r.actions.iter().take(step))
                .filter(|a| cats.category_of(**a) == c)
                .count() as u64;
            prop_assert_eq!(cumulative.get(step, c), want);
        }
    }
    for a in ActionKind::ALL {
        for b in ActionKind::ALL {
            let want: usize =
                records.iter().map(|r| r.actions.windows(2).filter(|w| w[0] == a && w[1] == b).count()).sum();
            prop_assert_eq!(transitions.count(a, b), want as u64);
        }
    }
    Ok(())
}

fn criterion_10(w: &World) -> Outcome {
    runner(500).run(&random_log(), |records| analytics_match_oracles(&records)).map_err(|e| e.to_string())?;

    // Logs from the agent under canonical, premature-stop and random scripts.
    let mut records = Vec::new();
    let mut record = |o: AgentOutcome| records.push(o.to_run_record(format!("h{}", records.len()), "DBpedia", "q"));
    record(run(w, canonical(), None));
    let q = population_query(1);
    record(run(
        w,
        vec![reply("s", "stop", ""), reply("x", "execute_sparql", &q), reply("s", "stop", "")],
        None,
    ));
    let any = (0usize..25).prop_flat_map(|n| {
        (0..n)
            .map(|i| prop_oneof![3 => search_reply(i), 2 => Just(reply("done", "stop", ""))])
            .collect::<Vec<_>>()
    });
    let mut rng = TestRunner::deterministic();
    for _ in 0..40 {
        let replies = any.new_tree(&mut rng).unwrap().current();
        record(run(w, replies, Some("ASK { ?s ?p ?o }")));
    }
    let logged = RunLog::load(&w.dir.path().join("service-runs.jsonl")).map(|l| l.records).unwrap_or_default();
    records.extend(logged);

    let m = transition_counts(&records);
    let stops: usize = records.iter().map(|r| r.actions.iter().filter(|a| **a == ActionKind::Stop).count()).sum();
    let after_execute = m.count(ActionKind::ExecuteSparql, ActionKind::Stop) as usize;
    ensure!(stops > 0, "harness produced no stop actions");
    ensure!(stops == after_execute, "{after_execute} of {stops} stops follow execute_sparql");
    Ok(format!(
        "500 random logs match the oracles; {after_execute}/{stops} stops follow execute_sparql in {} runs",
        records.len()
    ))
}

// ---------------------------------------------------------------- driver

type Criterion = Box<dyn Fn(&mut Option<World>) -> Outcome>;

fn main() -> ExitCode {
    let mut shared: Option<World> = None;
    let criteria: Vec<(&str, Criterion)> = vec![
        ("Welch t reproduction (steps)", Box::new(|_| criterion_1())),
        ("Welch t reproduction (times)", Box::new(|_| criterion_2())),
        ("RRF oracle equivalence", Box::new(|_| criterion_3())),
        ("BM25 oracle equivalence", Box::new(|_| criterion_4())),
        ("grounding worked example", Box::new(|w| criterion_5(w.get_or_insert_with(world)))),
        ("end-to-end hermetic run", Box::new(|w| criterion_6(w.get_or_insert_with(world)))),
        ("loop invariants under adversarial scripts", Box::new(|w| criterion_7(w.get_or_insert_with(world)))),
        ("API conformance", Box::new(|w| criterion_8(w.get_or_insert_with(world)))),
        ("parser robustness", Box::new(|_| criterion_9())),
        ("analytics oracles", Box::new(|w| criterion_10(w.get_or_insert_with(world)))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(|| check(&mut shared)))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        let elapsed = started.elapsed();
        match result {
            Ok(detail) => println!("PASS criterion {} ({name}): {detail} [{elapsed:.2?}]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): {why} [{elapsed:.2?}]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
