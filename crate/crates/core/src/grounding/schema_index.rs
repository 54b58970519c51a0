use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bm25::{sparse_vectorize, Bm25Params, CorpusStats, SparseVector, TermId};
use super::document::{KindFilter, MatchKind, SchemaDocument, ScoredMatch};
use super::embed::{DenseVector, EmbeddingProvider};
use super::persist::StagingDir;
use super::rrf::{rrf_fuse, DEFAULT_RRF_K};
use super::{GroundingError, INDEX_FORMAT_VERSION};
use crate::kg::Iri;

pub const DEFAULT_CANDIDATE_DEPTH: usize = 50;

const MANIFEST: &str = "manifest.json";
const DOCUMENTS: &str = "documents.jsonl";
const DENSE: &str = "dense.f64";
const SPARSE: &str = "sparse.bin";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridParams {
    /// Candidates taken from each arm before fusion.
    pub candidate_depth: usize,
    pub rrf_k: f64,
}

impl Default for HybridParams {
    fn default() -> Self {
        Self {
            candidate_depth: DEFAULT_CANDIDATE_DEPTH,
            rrf_k: DEFAULT_RRF_K,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridResult {
    pub matches: Vec<ScoredMatch>,
    /// The dense arm could not run and the ranking is sparse-only.
    pub dense_degraded: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct SchemaManifest {
    format_version: u32,
    index_kind: String,
    provider_id: String,
    dimension: usize,
    document_count: usize,
    bm25: Bm25Params,
    stats: CorpusStats,
}

/// Schema documents with their dense and sparse vectors.
///
/// Documents are kept in IRI order, so a position in `docs` doubles as the
/// IRI tie-breaker for every ranking.
#[derive(Debug, Clone)]
pub struct SchemaIndex {
    docs: Vec<SchemaDocument>,
    dense: Vec<DenseVector>,
    sparse: Vec<SparseVector>,
    stats: CorpusStats,
    bm25: Bm25Params,
    provider_id: String,
    dimension: usize,
    by_iri: BTreeMap<Iri, usize>,
}

impl SchemaIndex {
    /// Embeds and vectorizes every document. A later document with the same
    /// IRI replaces an earlier one.
    pub fn build(
        docs: impl IntoIterator<Item = SchemaDocument>,
        provider: &dyn EmbeddingProvider,
        bm25: Bm25Params,
    ) -> Result<Self, GroundingError> {
        let mut keyed: BTreeMap<Iri, SchemaDocument> = BTreeMap::new();
        for doc in docs {
            keyed.insert(doc.iri.clone(), doc);
        }
        if keyed.is_empty() {
            return Err(GroundingError::EmptyCorpus);
        }
        let docs: Vec<SchemaDocument> = keyed.into_values().collect();
        let stats = CorpusStats::from_texts(docs.iter().map(|d| d.text.as_str()));
        let dimension = provider.dimension();
        let mut dense = Vec::with_capacity(docs.len());
        for doc in &docs {
            let v = provider.embed(&doc.text)?;
            if v.dimension() != dimension {
                return Err(GroundingError::ProviderUnavailable(format!(
                    "provider returned dimension {} instead of {dimension}",
                    v.dimension()
                )));
            }
            dense.push(v);
        }
        let sparse = docs
            .iter()
            .map(|d| sparse_vectorize(&d.text, &stats, bm25).unwrap_or_default())
            .collect();
        Ok(Self::assemble(docs, dense, sparse, stats, bm25, provider.id(), dimension))
    }

    fn assemble(
        docs: Vec<SchemaDocument>,
        dense: Vec<DenseVector>,
        sparse: Vec<SparseVector>,
        stats: CorpusStats,
        bm25: Bm25Params,
        provider_id: String,
        dimension: usize,
    ) -> Self {
        let by_iri = docs.iter().enumerate().map(|(i, d)| (d.iri.clone(), i)).collect();
        Self {
            docs,
            dense,
            sparse,
            stats,
            bm25,
            provider_id,
            dimension,
            by_iri,
        }
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn documents(&self) -> &[SchemaDocument] {
        &self.docs
    }

    pub fn get(&self, iri: &Iri) -> Option<&SchemaDocument> {
        self.by_iri.get(iri).map(|&i| &self.docs[i])
    }

    pub fn dense_vector(&self, iri: &Iri) -> Option<&DenseVector> {
        self.by_iri.get(iri).map(|&i| &self.dense[i])
    }

    pub fn sparse_vector(&self, iri: &Iri) -> Option<&SparseVector> {
        self.by_iri.get(iri).map(|&i| &self.sparse[i])
    }

    pub fn stats(&self) -> &CorpusStats {
        &self.stats
    }

    pub fn provider_id(&self) -> &str {
        &self.provider_id
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Positions of accepted documents ordered by descending score, then
    /// by IRI, cut to `depth`.
    fn top(scored: Vec<(usize, f64)>, depth: usize) -> Vec<usize> {
        let mut scored = scored;
        scored.sort_by(|(i, a), (j, b)| b.total_cmp(a).then_with(|| i.cmp(j)));
        scored.into_iter().take(depth).map(|(i, _)| i).collect()
    }

    /// Dense arm: cosine similarity against every accepted document.
    fn dense_ranking(&self, query: &DenseVector, accept: &dyn Fn(usize) -> bool, depth: usize) -> Vec<usize> {
        let scored = (0..self.docs.len())
            .filter(|&i| accept(i))
            .map(|i| (i, query.cosine(&self.dense[i])))
            .collect();
        Self::top(scored, depth)
    }

    /// Sparse arm: dot product with every accepted document that shares at
    /// least one term with the query.
    fn sparse_ranking(&self, query: &SparseVector, accept: &dyn Fn(usize) -> bool, depth: usize) -> Vec<usize> {
        let scored = (0..self.docs.len())
            .filter(|&i| accept(i))
            .map(|i| (i, query.dot(&self.sparse[i])))
            .filter(|(_, s)| *s > 0.0)
            .collect();
        Self::top(scored, depth)
    }

    /// Hybrid dense + sparse search fused with RRF.
    ///
    /// The kind filter restricts both candidate pools, so a class search
    /// is never starved by properties that crowd the top of an arm. If the
    /// query cannot be embedded, or `provider` is not the one the index was
    /// built with, the dense arm is dropped and `dense_degraded` is set.
    pub fn hybrid_search(
        &self,
        query: &str,
        provider: &dyn EmbeddingProvider,
        filter: Option<KindFilter>,
        limit: usize,
        params: HybridParams,
    ) -> Result<HybridResult, GroundingError> {
        if query.trim().is_empty() {
            return Err(GroundingError::EmptyInput);
        }
        let accept = |i: usize| filter.is_none_or(|f| f.accepts(self.docs[i].kind));
        let depth = params.candidate_depth.max(1);

        let dense_query = if provider.id() == self.provider_id && provider.dimension() == self.dimension {
            match provider.embed(query) {
                Ok(v) if v.dimension() == self.dimension => Some(v),
                Ok(_) => None,
                Err(e) => {
                    tracing::warn!(error = %e, "dense arm unavailable, using sparse ranking only");
                    None
                }
            }
        } else {
            tracing::warn!(
                index = %self.provider_id,
                provider = %provider.id(),
                "embedding provider does not match the index, using sparse ranking only"
            );
            None
        };
        let dense_degraded = dense_query.is_none();
        let dense = dense_query
            .map(|q| self.dense_ranking(&q, &accept, depth))
            .unwrap_or_default();
        let sparse = sparse_vectorize(query, &self.stats, self.bm25)
            .map(|q| self.sparse_ranking(&q, &accept, depth))
            .unwrap_or_default();

        let dense_rank: BTreeMap<usize, usize> = dense.iter().enumerate().map(|(r, &i)| (i, r + 1)).collect();
        let sparse_rank: BTreeMap<usize, usize> = sparse.iter().enumerate().map(|(r, &i)| (i, r + 1)).collect();
        let matches = rrf_fuse(&[dense, sparse], params.rrf_k)
            .into_iter()
            .take(limit)
            .map(|(i, score)| {
                let doc = &self.docs[i];
                ScoredMatch {
                    iri: doc.iri.clone(),
                    label: doc.label.clone(),
                    kind: MatchKind::Schema(doc.kind),
                    score,
                    dense_rank: dense_rank.get(&i).copied(),
                    sparse_rank: sparse_rank.get(&i).copied(),
                    description: doc.comment.clone(),
                    domain: doc.domain.clone(),
                    range: doc.range.clone(),
                }
            })
            .collect();
        Ok(HybridResult { matches, dense_degraded })
    }

    /// Writes the index to `dir` atomically, replacing any previous index.
    pub fn persist(&self, dir: &Path) -> Result<(), GroundingError> {
        let staging = StagingDir::new(dir)?;
        let manifest = SchemaManifest {
            format_version: INDEX_FORMAT_VERSION,
            index_kind: "schema".into(),
            provider_id: self.provider_id.clone(),
            dimension: self.dimension,
            document_count: self.docs.len(),
            bm25: self.bm25,
            stats: self.stats.clone(),
        };
        fs::write(staging.path().join(MANIFEST), serde_json::to_vec_pretty(&manifest)?)?;

        let mut out = BufWriter::new(fs::File::create(staging.path().join(DOCUMENTS))?);
        for doc in &self.docs {
            serde_json::to_writer(&mut out, doc)?;
            out.write_all(b"\n")?;
        }
        out.into_inner().map_err(|e| e.into_error())?.sync_all()?;

        let mut out = BufWriter::new(fs::File::create(staging.path().join(DENSE))?);
        for v in &self.dense {
            for x in v.values() {
                out.write_all(&x.to_le_bytes())?;
            }
        }
        out.into_inner().map_err(|e| e.into_error())?.sync_all()?;

        let mut out = BufWriter::new(fs::File::create(staging.path().join(SPARSE))?);
        for v in &self.sparse {
            out.write_all(&(v.len() as u32).to_le_bytes())?;
            for (id, w) in v.entries() {
                out.write_all(&id.to_le_bytes())?;
                out.write_all(&w.to_le_bytes())?;
            }
        }
        out.into_inner().map_err(|e| e.into_error())?.sync_all()?;

        staging.publish()?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, GroundingError> {
        let manifest: SchemaManifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST))?)?;
        if manifest.format_version != INDEX_FORMAT_VERSION || manifest.index_kind != "schema" {
            return Err(GroundingError::Format(format!(
                "expected schema index format {INDEX_FORMAT_VERSION}, found {} format {}",
                manifest.index_kind, manifest.format_version
            )));
        }
        let n = manifest.document_count;
        let docs = fs::read_to_string(dir.join(DOCUMENTS))?
            .lines()
            .map(serde_json::from_str::<SchemaDocument>)
            .collect::<Result<Vec<_>, _>>()?;
        if docs.len() != n {
            return Err(GroundingError::Format(format!("{} documents listed, manifest says {n}", docs.len())));
        }
        if docs.windows(2).any(|w| w[0].iri >= w[1].iri) {
            return Err(GroundingError::Format("documents are not in strict IRI order".into()));
        }

        let raw = fs::read(dir.join(DENSE))?;
        let dim = manifest.dimension;
        if raw.len() != n * dim * 8 {
            return Err(GroundingError::Format("dense vector file has the wrong length".into()));
        }
        let dense = raw
            .chunks_exact(dim.max(1) * 8)
            .take(n)
            .map(|chunk| {
                let values = chunk
                    .chunks_exact(8)
                    .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
                    .collect();
                DenseVector::new(values).ok_or_else(|| GroundingError::Format("non-finite dense component".into()))
            })
            .collect::<Result<Vec<_>, _>>()?;

        let raw = fs::read(dir.join(SPARSE))?;
        let mut reader = ByteReader::new(&raw);
        let mut sparse = Vec::with_capacity(n);
        for _ in 0..n {
            let count = reader.u32()? as usize;
            let mut entries: Vec<(TermId, f64)> = Vec::with_capacity(count);
            for _ in 0..count {
                entries.push((reader.u64()?, reader.f64()?));
            }
            sparse.push(SparseVector::from_entries(entries));
        }
        if !reader.is_done() {
            return Err(GroundingError::Format("trailing bytes in sparse vector file".into()));
        }

        Ok(Self::assemble(
            docs,
            dense,
            sparse,
            manifest.stats,
            manifest.bm25,
            manifest.provider_id,
            dim,
        ))
    }
}

pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N], GroundingError> {
        let end = self.pos + N;
        let slice = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| GroundingError::Format("unexpected end of binary data".into()))?;
        self.pos = end;
        Ok(slice.try_into().expect("slice has length N"))
    }

    pub(crate) fn u32(&mut self) -> Result<u32, GroundingError> {
        self.take::<4>().map(u32::from_le_bytes)
    }

    pub(crate) fn u64(&mut self) -> Result<u64, GroundingError> {
        self.take::<8>().map(u64::from_le_bytes)
    }

    pub(crate) fn f64(&mut self) -> Result<f64, GroundingError> {
        self.take::<8>().map(f64::from_le_bytes)
    }

    pub(crate) fn is_done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}
