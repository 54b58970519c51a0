#![allow(dead_code)]

use std::sync::Arc;
use std::time::Duration;

use t2s_core::agent::DatasetRef;
use t2s_core::grounding::{
    entity_index_from_endpoint, schema_index_from_endpoint, Bm25Params, EntityIndex, HashingEmbedder,
};
use t2s_core::kg::{EndpointConfig, SparqlClient, DEFAULT_PAGE_SIZE};
use t2s_testkit::FixtureEndpoint;

pub const DBPEDIA_ID: &str = "https://text2sparql.aksw.org/2025/dbpedia/";
pub const CORPORATE_ID: &str = "https://text2sparql.aksw.org/2025/corporate/";

/// A fixture endpoint with indexes built from it. The index directory
/// lives as long as the fixture.
pub struct Fixture {
    pub endpoint: FixtureEndpoint,
    pub dataset: DatasetRef,
    _dir: tempfile::TempDir,
}

pub fn client(endpoint: &FixtureEndpoint) -> SparqlClient {
    SparqlClient::new(
        EndpointConfig::new(endpoint.query_url())
            .unwrap()
            .with_timeout(Duration::from_secs(10))
            .unwrap(),
    )
}

fn build(endpoint: FixtureEndpoint, id: &str, name: &str, languages: &[&str], fixed: Option<&str>) -> Fixture {
    let client = client(&endpoint);
    let embedder = Arc::new(HashingEmbedder::default());
    let schema = schema_index_from_endpoint(&client, embedder.as_ref(), Bm25Params::default(), DEFAULT_PAGE_SIZE)
        .expect("schema index");
    let dir = tempfile::tempdir().unwrap();
    let mut dataset = DatasetRef::new(id, name, client.clone(), Arc::new(schema), embedder);
    for lang in languages {
        let target = dir.path().join(format!("entities-{lang}"));
        let filter = (!lang.is_empty()).then_some(*lang);
        entity_index_from_endpoint(&client, filter, &target, DEFAULT_PAGE_SIZE).expect("entity index");
        let key = if lang.is_empty() { "en" } else { lang };
        dataset = dataset.with_entity_index(key, Arc::new(EntityIndex::load(&target).unwrap()));
    }
    if let Some(l) = fixed {
        dataset = dataset.with_fixed_language(l);
    }
    Fixture { endpoint, dataset, _dir: dir }
}

pub fn dbpedia() -> Fixture {
    build(FixtureEndpoint::mini_dbpedia(), DBPEDIA_ID, "DBpedia", &["en", "es"], None)
}

pub fn corporate() -> Fixture {
    build(FixtureEndpoint::corporate(), CORPORATE_ID, "corporate", &[""], Some("en"))
}

pub const BERLIN: &str = "http://dbpedia.org/resource/Berlin";
pub const POPULATION_TOTAL: &str = "http://dbpedia.org/ontology/populationTotal";

pub fn population_query() -> String {
    format!("SELECT ?population WHERE {{ <{BERLIN}> <{POPULATION_TOTAL}> ?population }}")
}

/// Controller reply in the format the prompt asks for.
pub fn reply(thought: &str, action: &str, argument: &str) -> String {
    format!("Thought: {thought}\nAction: {action}({argument})")
}

/// Scripted controller replies for the canonical loop: find the entity,
/// find the property, run the query, stop.
pub fn happy_path_script() -> Vec<String> {
    vec![
        reply("I need the IRI of Berlin.", "search_entity_by_label", "Berlin"),
        reply("Now the population property.", "search_property_by_label", "population"),
        reply("Query the population.", "execute_sparql", &population_query()),
        reply("The result is the population.", "stop", ""),
    ]
}
