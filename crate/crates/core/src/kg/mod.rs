//! SPARQL 1.1 protocol access to a knowledge graph.
//!
//! All queries go to the default graph of the configured endpoint and ask
//! for `application/sparql-results+json`. Endpoint failures are values
//! ([`KgError`]) so the agent can observe them.

mod client;
mod harvest;
mod results;
mod term;

pub use client::{
    classify_response, outgoing_edges_query, property_examples_query, EndpointConfig,
    EndpointConfigError, EntityExcerpt, KgError, SparqlClient, PROPERTY_EXAMPLE_LIMIT,
    SPARQL_RESULTS_JSON,
};
pub use harvest::{
    harvest_entities, harvest_schema, EntityHarvest, HarvestError, LabeledEntity, DEFAULT_PAGE_SIZE,
};
pub use results::{parse_results_json, Bindings, ResultBody, SparqlResultSet};
pub use term::{InvalidIri, Iri, LiteralAnnotation, RdfTerm};
