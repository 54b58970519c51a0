//! Disk-backed inverted index over instance labels and comments.
//!
//! Building streams: entries are buffered into IRI-sorted segment files of
//! bounded size, then merged (later segments win on duplicate IRIs) while
//! postings are spilled into term-sorted runs that are merged in turn. The
//! loaded index keeps only the term dictionary, document offsets and field
//! lengths in memory; postings and documents are read on demand.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::bm25::{term_id, Bm25Params, TermId};
use super::document::{EntityIndexEntry, MatchKind, ScoredMatch};
use super::persist::StagingDir;
use super::schema_index::ByteReader;
use super::{GroundingError, INDEX_FORMAT_VERSION};
use crate::kg::Iri;
use crate::text::tokenize;

pub const NAME_WEIGHT: f64 = 2.0;
pub const DESCRIPTION_WEIGHT: f64 = 1.0;

const DEFAULT_SEGMENT_CAPACITY: usize = 100_000;
const DEFAULT_RUN_CAPACITY: usize = 2_000_000;

const MANIFEST: &str = "manifest.json";
const DOCS: &str = "docs.jsonl";
const DOCS_IDX: &str = "docs.idx";
const LENGTHS: &str = "lengths.bin";
const TERMS: &str = "terms.bin";
const POSTINGS: &str = "postings.bin";
const SCRATCH: &str = "scratch";

const TERM_RECORD: usize = 8 + 4 + 4 + 8 + 4;
const POSTING_RECORD: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Posting {
    doc: u32,
    tf_name: u32,
    tf_desc: u32,
}

#[derive(Debug, Clone, Copy)]
struct TermEntry {
    id: TermId,
    df_name: u32,
    df_desc: u32,
    offset: u64,
    count: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct EntityManifest {
    format_version: u32,
    index_kind: String,
    language: Option<String>,
    document_count: u64,
    skipped: u64,
    bm25: Bm25Params,
    name_weight: f64,
    description_weight: f64,
    total_name_len: u64,
    total_description_len: u64,
    term_count: u64,
    posting_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityBuildReport {
    /// Distinct IRIs in the finished index.
    pub documents: u64,
    /// Entries rejected at ingestion because their name was blank.
    pub skipped: u64,
    /// Entries accepted, including those later replaced by a duplicate IRI.
    pub accepted: u64,
}

pub struct EntityIndexBuilder {
    staging: StagingDir,
    language: Option<String>,
    bm25: Bm25Params,
    segment_capacity: usize,
    run_capacity: usize,
    buffer: BTreeMap<Iri, EntityIndexEntry>,
    segments: Vec<PathBuf>,
    accepted: u64,
    skipped: u64,
}

impl EntityIndexBuilder {
    /// Starts a build that will be published at `target` by [`finish`](Self::finish).
    pub fn new(target: &Path, language: Option<&str>) -> Result<Self, GroundingError> {
        let staging = StagingDir::new(target)?;
        fs::create_dir(staging.path().join(SCRATCH))?;
        Ok(Self {
            staging,
            language: language.map(str::to_string),
            bm25: Bm25Params::default(),
            segment_capacity: DEFAULT_SEGMENT_CAPACITY,
            run_capacity: DEFAULT_RUN_CAPACITY,
            buffer: BTreeMap::new(),
            segments: Vec::new(),
            accepted: 0,
            skipped: 0,
        })
    }

    /// Maximum entries held in memory before a segment is written.
    pub fn with_segment_capacity(mut self, n: usize) -> Self {
        self.segment_capacity = n.max(1);
        self
    }

    /// Maximum postings held in memory before a run is written.
    pub fn with_run_capacity(mut self, n: usize) -> Self {
        self.run_capacity = n.max(1);
        self
    }

    pub fn with_bm25(mut self, params: Bm25Params) -> Self {
        self.bm25 = params;
        self
    }

    /// Returns `false` (and counts a skip) for an entry with a blank name.
    pub fn add(&mut self, entry: EntityIndexEntry) -> Result<bool, GroundingError> {
        if entry.name.trim().is_empty() {
            self.skipped += 1;
            return Ok(false);
        }
        self.accepted += 1;
        self.buffer.insert(entry.iri.clone(), entry);
        if self.buffer.len() >= self.segment_capacity {
            self.spill_segment()?;
        }
        Ok(true)
    }

    fn scratch(&self, name: String) -> PathBuf {
        self.staging.path().join(SCRATCH).join(name)
    }

    fn spill_segment(&mut self) -> Result<(), GroundingError> {
        if self.buffer.is_empty() {
            return Ok(());
        }
        let path = self.scratch(format!("segment-{:06}.jsonl", self.segments.len()));
        let mut out = BufWriter::new(File::create(&path)?);
        for entry in std::mem::take(&mut self.buffer).into_values() {
            serde_json::to_writer(&mut out, &entry)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        self.segments.push(path);
        Ok(())
    }

    pub fn finish(mut self) -> Result<EntityBuildReport, GroundingError> {
        self.spill_segment()?;
        let dir = self.staging.path().to_path_buf();

        let mut docs_out = BufWriter::new(File::create(dir.join(DOCS))?);
        let mut idx_out = BufWriter::new(File::create(dir.join(DOCS_IDX))?);
        let mut len_out = BufWriter::new(File::create(dir.join(LENGTHS))?);
        let mut offset = 0u64;
        let mut doc_id = 0u32;
        let (mut total_name, mut total_desc) = (0u64, 0u64);
        let mut pending: BTreeMap<TermId, Vec<Posting>> = BTreeMap::new();
        let mut pending_count = 0usize;
        let mut runs = Vec::new();

        let mut merge = SegmentMerge::open(&self.segments)?;
        while let Some(entry) = merge.next_entry()? {
            let mut line = serde_json::to_vec(&entry)?;
            line.push(b'\n');
            docs_out.write_all(&line)?;
            idx_out.write_all(&offset.to_le_bytes())?;
            offset += line.len() as u64;

            let name = tokenize(&entry.name);
            let desc = entry.description.as_deref().map(tokenize).unwrap_or_default();
            len_out.write_all(&(name.len() as u32).to_le_bytes())?;
            len_out.write_all(&(desc.len() as u32).to_le_bytes())?;
            total_name += name.len() as u64;
            total_desc += desc.len() as u64;

            let mut tf: BTreeMap<TermId, (u32, u32)> = BTreeMap::new();
            for t in &name {
                tf.entry(term_id(t)).or_default().0 += 1;
            }
            for t in &desc {
                tf.entry(term_id(t)).or_default().1 += 1;
            }
            for (term, (tf_name, tf_desc)) in tf {
                pending.entry(term).or_default().push(Posting {
                    doc: doc_id,
                    tf_name,
                    tf_desc,
                });
                pending_count += 1;
            }
            if pending_count >= self.run_capacity {
                runs.push(self.write_run(runs.len(), std::mem::take(&mut pending))?);
                pending_count = 0;
            }
            doc_id = doc_id
                .checked_add(1)
                .ok_or_else(|| GroundingError::Format("more than u32::MAX documents".into()))?;
        }
        idx_out.write_all(&offset.to_le_bytes())?;
        if !pending.is_empty() {
            runs.push(self.write_run(runs.len(), pending)?);
        }
        for w in [docs_out, idx_out, len_out] {
            w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        }

        let (term_count, posting_count) = merge_runs(&runs, &dir)?;
        fs::remove_dir_all(dir.join(SCRATCH))?;

        let manifest = EntityManifest {
            format_version: INDEX_FORMAT_VERSION,
            index_kind: "entity".into(),
            language: self.language.clone(),
            document_count: u64::from(doc_id),
            skipped: self.skipped,
            bm25: self.bm25,
            name_weight: NAME_WEIGHT,
            description_weight: DESCRIPTION_WEIGHT,
            total_name_len: total_name,
            total_description_len: total_desc,
            term_count,
            posting_count,
        };
        fs::write(dir.join(MANIFEST), serde_json::to_vec_pretty(&manifest)?)?;
        self.staging.publish()?;
        Ok(EntityBuildReport {
            documents: u64::from(doc_id),
            skipped: self.skipped,
            accepted: self.accepted,
        })
    }

    /// Run format: repeated `term u64, count u32, count × posting`.
    fn write_run(&self, n: usize, postings: BTreeMap<TermId, Vec<Posting>>) -> Result<PathBuf, GroundingError> {
        let path = self.scratch(format!("run-{n:06}.bin"));
        let mut out = BufWriter::new(File::create(&path)?);
        for (term, list) in postings {
            out.write_all(&term.to_le_bytes())?;
            out.write_all(&(list.len() as u32).to_le_bytes())?;
            for p in list {
                write_posting(&mut out, p)?;
            }
        }
        out.flush()?;
        Ok(path)
    }
}

fn write_posting(out: &mut impl Write, p: Posting) -> std::io::Result<()> {
    out.write_all(&p.doc.to_le_bytes())?;
    out.write_all(&p.tf_name.to_le_bytes())?;
    out.write_all(&p.tf_desc.to_le_bytes())
}

fn decode_posting(b: &[u8]) -> Posting {
    let u = |i: usize| u32::from_le_bytes(b[i..i + 4].try_into().expect("4 bytes"));
    Posting {
        doc: u(0),
        tf_name: u(4),
        tf_desc: u(8),
    }
}

/// K-way merge of IRI-sorted segment files.
struct SegmentMerge {
    readers: Vec<std::io::Lines<BufReader<File>>>,
    heads: Vec<Option<EntityIndexEntry>>,
    heap: BinaryHeap<Reverse<(Iri, usize)>>,
}

impl SegmentMerge {
    fn open(paths: &[PathBuf]) -> Result<Self, GroundingError> {
        let mut merge = Self {
            readers: Vec::new(),
            heads: Vec::new(),
            heap: BinaryHeap::new(),
        };
        for (i, path) in paths.iter().enumerate() {
            merge.readers.push(BufReader::new(File::open(path)?).lines());
            merge.heads.push(None);
            merge.advance(i)?;
        }
        Ok(merge)
    }

    fn advance(&mut self, seg: usize) -> Result<(), GroundingError> {
        self.heads[seg] = match self.readers[seg].next() {
            Some(line) => Some(serde_json::from_str(&line?)?),
            None => None,
        };
        if let Some(e) = &self.heads[seg] {
            self.heap.push(Reverse((e.iri.clone(), seg)));
        }
        Ok(())
    }

    /// Next distinct IRI; among duplicates the latest segment wins.
    fn next_entry(&mut self) -> Result<Option<EntityIndexEntry>, GroundingError> {
        let Some(Reverse((iri, first))) = self.heap.pop() else {
            return Ok(None);
        };
        let mut same = vec![first];
        while matches!(self.heap.peek(), Some(Reverse((next, _))) if *next == iri) {
            let Reverse((_, seg)) = self.heap.pop().expect("peeked");
            same.push(seg);
        }
        let winner = *same.iter().max().expect("non-empty");
        let entry = self.heads[winner].take();
        for seg in same {
            self.advance(seg)?;
        }
        Ok(entry)
    }
}

struct RunReader {
    input: BufReader<File>,
    head: Option<(TermId, Vec<Posting>)>,
}

impl RunReader {
    fn advance(&mut self) -> Result<(), GroundingError> {
        let mut term = [0u8; 8];
        match self.input.read_exact(&mut term) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
                self.head = None;
                return Ok(());
            }
            Err(e) => return Err(e.into()),
        }
        let mut count = [0u8; 4];
        self.input.read_exact(&mut count)?;
        let mut raw = vec![0u8; u32::from_le_bytes(count) as usize * POSTING_RECORD];
        self.input.read_exact(&mut raw)?;
        let postings = raw.chunks_exact(POSTING_RECORD).map(decode_posting).collect();
        self.head = Some((u64::from_le_bytes(term), postings));
        Ok(())
    }
}

/// Merges term-sorted runs into the term dictionary and postings file.
/// Runs cover increasing document ranges, so concatenating a term's lists
/// in run order keeps postings sorted by document.
fn merge_runs(runs: &[PathBuf], dir: &Path) -> Result<(u64, u64), GroundingError> {
    let mut readers = Vec::new();
    let mut heap = BinaryHeap::new();
    for (i, path) in runs.iter().enumerate() {
        let mut r = RunReader {
            input: BufReader::new(File::open(path)?),
            head: None,
        };
        r.advance()?;
        if let Some((term, _)) = &r.head {
            heap.push(Reverse((*term, i)));
        }
        readers.push(r);
    }
    let mut terms_out = BufWriter::new(File::create(dir.join(TERMS))?);
    let mut postings_out = BufWriter::new(File::create(dir.join(POSTINGS))?);
    let (mut term_count, mut posting_count) = (0u64, 0u64);
    while let Some(Reverse((term, first))) = heap.pop() {
        let mut sources = vec![first];
        while matches!(heap.peek(), Some(Reverse((t, _))) if *t == term) {
            let Reverse((_, i)) = heap.pop().expect("peeked");
            sources.push(i);
        }
        sources.sort_unstable();
        let (mut df_name, mut df_desc, mut count) = (0u32, 0u32, 0u32);
        for &i in &sources {
            let (_, list) = readers[i].head.take().expect("run head present");
            for p in list {
                df_name += u32::from(p.tf_name > 0);
                df_desc += u32::from(p.tf_desc > 0);
                count += 1;
                write_posting(&mut postings_out, p)?;
            }
            readers[i].advance()?;
            if let Some((t, _)) = &readers[i].head {
                heap.push(Reverse((*t, i)));
            }
        }
        terms_out.write_all(&term.to_le_bytes())?;
        terms_out.write_all(&df_name.to_le_bytes())?;
        terms_out.write_all(&df_desc.to_le_bytes())?;
        terms_out.write_all(&posting_count.to_le_bytes())?;
        terms_out.write_all(&count.to_le_bytes())?;
        term_count += 1;
        posting_count += u64::from(count);
    }
    for w in [terms_out, postings_out] {
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    }
    Ok((term_count, posting_count))
}

/// Streams `entries` into a new index at `target`.
pub fn build_entity_index(
    target: &Path,
    language: Option<&str>,
    entries: impl IntoIterator<Item = EntityIndexEntry>,
) -> Result<EntityBuildReport, GroundingError> {
    let mut builder = EntityIndexBuilder::new(target, language)?;
    for entry in entries {
        builder.add(entry)?;
    }
    builder.finish()
}

/// A loaded, read-only entity index. Safe to share between threads.
#[derive(Debug)]
pub struct EntityIndex {
    docs: File,
    postings: File,
    offsets: Vec<u64>,
    lengths: Vec<(u32, u32)>,
    terms: Vec<TermEntry>,
    avg_name: f64,
    avg_desc: f64,
    bm25: Bm25Params,
    language: Option<String>,
    skipped: u64,
}

impl EntityIndex {
    pub fn load(dir: &Path) -> Result<Self, GroundingError> {
        let manifest: EntityManifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST))?)?;
        if manifest.format_version != INDEX_FORMAT_VERSION || manifest.index_kind != "entity" {
            return Err(GroundingError::Format(format!(
                "expected entity index format {INDEX_FORMAT_VERSION}, found {} format {}",
                manifest.index_kind, manifest.format_version
            )));
        }
        let n = manifest.document_count as usize;

        let raw = fs::read(dir.join(DOCS_IDX))?;
        if raw.len() != (n + 1) * 8 {
            return Err(GroundingError::Format("document offset file has the wrong length".into()));
        }
        let offsets = raw
            .chunks_exact(8)
            .map(|b| u64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();

        let raw = fs::read(dir.join(LENGTHS))?;
        if raw.len() != n * 8 {
            return Err(GroundingError::Format("length file has the wrong length".into()));
        }
        let mut r = ByteReader::new(&raw);
        let lengths = (0..n).map(|_| Ok((r.u32()?, r.u32()?))).collect::<Result<Vec<_>, GroundingError>>()?;

        let raw = fs::read(dir.join(TERMS))?;
        if raw.len() != manifest.term_count as usize * TERM_RECORD {
            return Err(GroundingError::Format("term dictionary has the wrong length".into()));
        }
        let mut r = ByteReader::new(&raw);
        let mut terms = Vec::with_capacity(manifest.term_count as usize);
        for _ in 0..manifest.term_count {
            terms.push(TermEntry {
                id: r.u64()?,
                df_name: r.u32()?,
                df_desc: r.u32()?,
                offset: r.u64()?,
                count: r.u32()?,
            });
        }
        if terms.windows(2).any(|w| w[0].id >= w[1].id) {
            return Err(GroundingError::Format("term dictionary is not sorted".into()));
        }

        let postings = File::open(dir.join(POSTINGS))?;
        if postings.metadata()?.len() != manifest.posting_count * POSTING_RECORD as u64 {
            return Err(GroundingError::Format("postings file has the wrong length".into()));
        }
        let avg = |total: u64| if n == 0 { 0.0 } else { total as f64 / n as f64 };
        Ok(Self {
            docs: File::open(dir.join(DOCS))?,
            postings,
            offsets,
            lengths,
            terms,
            avg_name: avg(manifest.total_name_len),
            avg_desc: avg(manifest.total_description_len),
            bm25: manifest.bm25,
            language: manifest.language,
            skipped: manifest.skipped,
        })
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    pub fn language(&self) -> Option<&str> {
        self.language.as_deref()
    }

    /// Entries skipped for a blank name during the build.
    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    /// Document by position; positions follow IRI order.
    pub fn document(&self, id: usize) -> Result<EntityIndexEntry, GroundingError> {
        let (start, end) = (self.offsets[id], self.offsets[id + 1]);
        let mut buf = vec![0u8; (end - start) as usize];
        self.docs.read_exact_at(&mut buf, start)?;
        Ok(serde_json::from_slice(&buf)?)
    }

    pub fn find_by_iri(&self, iri: &Iri) -> Result<Option<EntityIndexEntry>, GroundingError> {
        let (mut lo, mut hi) = (0usize, self.len());
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            let doc = self.document(mid)?;
            match doc.iri.cmp(iri) {
                std::cmp::Ordering::Equal => return Ok(Some(doc)),
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
            }
        }
        Ok(None)
    }

    fn postings(&self, term: &TermEntry) -> Result<Vec<Posting>, GroundingError> {
        let mut raw = vec![0u8; term.count as usize * POSTING_RECORD];
        self.postings.read_exact_at(&mut raw, term.offset * POSTING_RECORD as u64)?;
        Ok(raw.chunks_exact(POSTING_RECORD).map(decode_posting).collect())
    }

    /// BM25 over both fields, the name weighted [`NAME_WEIGHT`] and the
    /// description [`DESCRIPTION_WEIGHT`]. Each field uses its own document
    /// frequency and average length. Query terms are deduplicated and
    /// applied in term-id order. Ties go to the smaller IRI; documents
    /// sharing no term with the query are never returned.
    pub fn search(&self, query: &str, limit: usize) -> Result<Vec<ScoredMatch>, GroundingError> {
        let mut ids: Vec<TermId> = tokenize(query).iter().map(|t| term_id(t)).collect();
        ids.sort_unstable();
        ids.dedup();
        let n = self.len() as u64;
        let mut scores: HashMap<u32, f64> = HashMap::new();
        for id in ids {
            let Ok(pos) = self.terms.binary_search_by_key(&id, |t| t.id) else {
                continue;
            };
            let term = self.terms[pos];
            let idf_name = Bm25Params::idf(n, u64::from(term.df_name));
            let idf_desc = Bm25Params::idf(n, u64::from(term.df_desc));
            for p in self.postings(&term)? {
                let (name_len, desc_len) = self.lengths[p.doc as usize];
                let contribution = NAME_WEIGHT * self.bm25.weight(idf_name, p.tf_name, name_len, self.avg_name)
                    + DESCRIPTION_WEIGHT * self.bm25.weight(idf_desc, p.tf_desc, desc_len, self.avg_desc);
                *scores.entry(p.doc).or_insert(0.0) += contribution;
            }
        }
        let mut ranked: Vec<(u32, f64)> = scores.into_iter().filter(|(_, s)| *s > 0.0).collect();
        ranked.sort_by(|(a, x), (b, y)| y.total_cmp(x).then_with(|| a.cmp(b)));
        ranked.truncate(limit);
        ranked
            .into_iter()
            .enumerate()
            .map(|(rank, (doc, score))| {
                let entry = self.document(doc as usize)?;
                Ok(ScoredMatch {
                    iri: entry.iri,
                    label: entry.name,
                    kind: MatchKind::Instance,
                    score,
                    dense_rank: None,
                    sparse_rank: Some(rank + 1),
                    description: entry.description,
                    domain: None,
                    range: None,
                })
            })
            .collect()
    }
}
