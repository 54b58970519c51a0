//! BM25 term weighting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::text::{fnv1a64, tokenize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    /// `ln(1 + (n - df + 0.5) / (df + 0.5))`, always positive for `df <= n`.
    pub fn idf(n: u64, df: u64) -> f64 {
        (1.0 + (n as f64 - df as f64 + 0.5) / (df as f64 + 0.5)).ln()
    }

    /// Saturated, length-normalized term frequency times `idf`.
    /// Zero when `tf` is zero.
    pub fn weight(&self, idf: f64, tf: u32, len: u32, avg_len: f64) -> f64 {
        if tf == 0 {
            return 0.0;
        }
        let tf = f64::from(tf);
        let rel_len = if avg_len > 0.0 { f64::from(len) / avg_len } else { 1.0 };
        idf * (tf * (self.k1 + 1.0)) / (tf + self.k1 * (1.0 - self.b + self.b * rel_len))
    }
}

pub type TermId = u64;

pub fn term_id(term: &str) -> TermId {
    fnv1a64(term.as_bytes())
}

/// Corpus-level statistics a BM25 weight depends on.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub doc_count: u64,
    pub total_len: u64,
    pub doc_freq: BTreeMap<TermId, u64>,
}

impl CorpusStats {
    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut stats = CorpusStats::default();
        for text in texts {
            stats.add_document(text);
        }
        stats
    }

    pub fn add_document(&mut self, text: &str) {
        let tokens = tokenize(text);
        self.doc_count += 1;
        self.total_len += tokens.len() as u64;
        let mut unique: Vec<TermId> = tokens.iter().map(|t| term_id(t)).collect();
        unique.sort_unstable();
        unique.dedup();
        for id in unique {
            *self.doc_freq.entry(id).or_default() += 1;
        }
    }

    pub fn avg_len(&self) -> f64 {
        if self.doc_count == 0 {
            0.0
        } else {
            self.total_len as f64 / self.doc_count as f64
        }
    }

    pub fn df(&self, id: TermId) -> u64 {
        self.doc_freq.get(&id).copied().unwrap_or(0)
    }
}

/// Term id → positive weight. Zero weights are never stored.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    entries: BTreeMap<TermId, f64>,
}

impl SparseVector {
    pub fn from_entries(entries: impl IntoIterator<Item = (TermId, f64)>) -> Self {
        Self {
            entries: entries.into_iter().filter(|(_, w)| *w > 0.0).collect(),
        }
    }

    pub fn get(&self, id: TermId) -> Option<f64> {
        self.entries.get(&id).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (TermId, f64)> + '_ {
        self.entries.iter().map(|(k, v)| (*k, *v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sum of products over shared term ids, accumulated in term-id order.
    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .entries
            .iter()
            .filter_map(|(id, w)| large.entries.get(id).map(|v| w * v))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot vectorize text without tokens")]
pub struct EmptyInput;

/// BM25 weights of the terms of `text`, using `text` itself as the
/// document (its term frequencies and length) against `stats`.
pub fn sparse_vectorize(
    text: &str,
    stats: &CorpusStats,
    params: Bm25Params,
) -> Result<SparseVector, EmptyInput> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(EmptyInput);
    }
    let len = tokens.len() as u32;
    let mut tf: BTreeMap<TermId, u32> = BTreeMap::new();
    for t in &tokens {
        *tf.entry(term_id(t)).or_default() += 1;
    }
    let avg = stats.avg_len();
    Ok(SparseVector::from_entries(tf.into_iter().map(|(id, f)| {
        let idf = Bm25Params::idf(stats.doc_count, stats.df(id));
        (id, params.weight(idf, f, len, avg))
    })))
}
