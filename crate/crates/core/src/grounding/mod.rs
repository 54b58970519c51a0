//! Retrieval over the knowledge graph's vocabulary.
//!
//! Schema entities (classes and properties) go into a [`SchemaIndex`] that
//! holds a dense and a BM25 sparse vector per document and answers hybrid
//! queries fused with RRF. Instances go into an [`EntityIndex`], a
//! disk-backed inverted index scored with field-weighted BM25.

mod bm25;
mod document;
mod embed;
mod entity_index;
mod ingest;
mod persist;
mod rrf;
mod schema_index;

pub use bm25::{sparse_vectorize, term_id, Bm25Params, CorpusStats, EmptyInput, SparseVector, TermId};
pub use document::{EntityIndexEntry, KindFilter, MatchKind, SchemaDocument, SchemaKind, ScoredMatch};
pub use embed::{DenseVector, EmbedError, EmbeddingProvider, HashingEmbedder, HttpEmbedder};
pub use entity_index::{
    build_entity_index, EntityBuildReport, EntityIndex, EntityIndexBuilder, DESCRIPTION_WEIGHT, NAME_WEIGHT,
};
pub use ingest::{entity_index_from_endpoint, schema_index_from_endpoint, IngestError};
pub use rrf::{rrf_fuse, DEFAULT_RRF_K};
pub use schema_index::{HybridParams, HybridResult, SchemaIndex, DEFAULT_CANDIDATE_DEPTH};

/// Version written into every index manifest; loading rejects any other.
pub const INDEX_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum GroundingError {
    #[error("index I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("empty input")]
    EmptyInput,
    #[error("embedding provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("cannot build an index from zero documents")]
    EmptyCorpus,
    #[error("invalid index data: {0}")]
    Format(String),
}

impl From<EmbedError> for GroundingError {
    fn from(e: EmbedError) -> Self {
        match e {
            EmbedError::EmptyInput => GroundingError::EmptyInput,
            EmbedError::ProviderUnavailable(m) => GroundingError::ProviderUnavailable(m),
        }
    }
}

impl From<serde_json::Error> for GroundingError {
    fn from(e: serde_json::Error) -> Self {
        GroundingError::Format(e.to_string())
    }
}
