//! Index builds fed directly from a SPARQL endpoint.

use std::path::Path;

use super::{Bm25Params, EmbeddingProvider, EntityBuildReport, EntityIndexBuilder, EntityIndexEntry, GroundingError, SchemaIndex};
use crate::kg::{harvest_entities, harvest_schema, HarvestError, SparqlClient};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error(transparent)]
    Harvest(#[from] HarvestError),
    #[error(transparent)]
    Index(#[from] GroundingError),
}

/// Harvests the ontology and builds an in-memory schema index.
pub fn schema_index_from_endpoint(
    client: &SparqlClient,
    provider: &dyn EmbeddingProvider,
    bm25: Bm25Params,
    page_size: usize,
) -> Result<SchemaIndex, IngestError> {
    let docs = harvest_schema(client, page_size)?;
    Ok(SchemaIndex::build(docs, provider, bm25)?)
}

/// Streams labeled instances in `language` (all labels when `None`) into a
/// persisted entity index at `target`.
pub fn entity_index_from_endpoint(
    client: &SparqlClient,
    language: Option<&str>,
    target: &Path,
    page_size: usize,
) -> Result<EntityBuildReport, IngestError> {
    let mut builder = EntityIndexBuilder::new(target, language)?;
    for entity in harvest_entities(client, language, page_size) {
        let entity = entity?;
        builder.add(EntityIndexEntry::new(entity.iri, entity.label, entity.comment))?;
    }
    Ok(builder.finish()?)
}
