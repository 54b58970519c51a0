//! Bulk extraction of schema entities and labeled instances for indexing.

use std::collections::{BTreeMap, VecDeque};

use super::client::{KgError, SparqlClient};
use super::results::Bindings;
use super::term::{Iri, RdfTerm};
use crate::grounding::{SchemaDocument, SchemaKind};

pub const DEFAULT_PAGE_SIZE: usize = 10_000;

const PREFIXES: &str = "PREFIX owl: <http://www.w3.org/2002/07/owl#>\n\
PREFIX rdfs: <http://www.w3.org/2000/01/rdf-schema#>\n";

/// A harvest aborted by an endpoint failure after reading `rows_read` rows.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("harvest aborted after {rows_read} rows: {source}")]
pub struct HarvestError {
    pub rows_read: usize,
    #[source]
    pub source: KgError,
}

fn schema_query() -> String {
    format!(
        "{PREFIXES}SELECT ?entity ?type ?label ?comment ?domain ?range WHERE {{
  VALUES ?type {{ owl:Class owl:ObjectProperty owl:DatatypeProperty }}
  ?entity a ?type .
  FILTER(isIRI(?entity))
  OPTIONAL {{ ?entity rdfs:label ?label }}
  OPTIONAL {{ ?entity rdfs:comment ?comment }}
  OPTIONAL {{ ?entity rdfs:domain ?domain }}
  OPTIONAL {{ ?entity rdfs:range ?range }}
}}
ORDER BY ?entity ?type ?label ?comment ?domain ?range"
    )
}

fn entity_query(language: Option<&str>) -> String {
    let label_filter = match language {
        Some(tag) => format!(
            "  FILTER(lang(?label) = \"\" || langMatches(lang(?label), \"{}\"))\n",
            tag.chars()
                .filter(|c| c.is_ascii_alphanumeric() || *c == '-')
                .collect::<String>()
        ),
        None => String::new(),
    };
    format!(
        "{PREFIXES}SELECT ?entity ?label ?comment WHERE {{
  ?entity rdfs:label ?label .
  FILTER(isIRI(?entity))
{label_filter}  FILTER NOT EXISTS {{
    ?entity a ?schemaType .
    FILTER(?schemaType IN (owl:Class, owl:ObjectProperty, owl:DatatypeProperty))
  }}
  OPTIONAL {{
    ?entity rdfs:comment ?comment .
    FILTER(lang(?comment) = lang(?label) || lang(?comment) = \"\")
  }}
}}
ORDER BY ?entity ?label ?comment"
    )
}

fn paged(query: &str, page_size: usize, offset: usize) -> String {
    format!("{query}\nLIMIT {page_size}\nOFFSET {offset}")
}

/// One candidate text with its language tag ("" when untagged).
type Tagged = (String, String);

/// Picks a display text: English first, then untagged, then the smallest
/// remaining `(language, text)`.
fn pick_preferred(candidates: &[Tagged]) -> Option<String> {
    let rank = |lang: &str| match lang {
        "en" => 0,
        l if l.starts_with("en-") => 1,
        "" => 2,
        _ => 3,
    };
    candidates
        .iter()
        .min_by(|(t1, l1), (t2, l2)| rank(l1).cmp(&rank(l2)).then(l1.cmp(l2)).then(t1.cmp(t2)))
        .map(|(t, _)| t.clone())
}

fn literal_text(row: &Bindings, var: &str) -> Option<Tagged> {
    match row.get(var)? {
        term @ RdfTerm::Literal { lexical, .. } => {
            Some((lexical.clone(), term.language().unwrap_or("").to_string()))
        }
        _ => None,
    }
}

fn iri_value(row: &Bindings, var: &str) -> Option<Iri> {
    row.get(var)?.as_iri().cloned()
}

#[derive(Default)]
struct SchemaAccumulator {
    kinds: Vec<SchemaKind>,
    labels: Vec<Tagged>,
    comments: Vec<Tagged>,
    domains: Vec<Iri>,
    ranges: Vec<Iri>,
}

/// Harvests every `owl:Class`, `owl:ObjectProperty` and
/// `owl:DatatypeProperty` with its label, comment, domain and range.
///
/// Entities without `rdfs:label` are labeled with their IRI local name.
/// When several values exist, English text is preferred and IRIs are
/// chosen by lexicographic order, so the output is deterministic.
pub fn harvest_schema(
    client: &SparqlClient,
    page_size: usize,
) -> Result<Vec<SchemaDocument>, HarvestError> {
    let page_size = page_size.max(1);
    let query = schema_query();
    let mut acc: BTreeMap<Iri, SchemaAccumulator> = BTreeMap::new();
    let mut rows_read = 0;
    loop {
        let page = client
            .select_all(&paged(&query, page_size, rows_read), None)
            .map_err(|source| HarvestError { rows_read, source })?;
        let rows = page.rows();
        for row in rows {
            let (Some(entity), Some(kind)) = (
                iri_value(row, "entity"),
                iri_value(row, "type").and_then(|t| SchemaKind::from_owl_type(&t)),
            ) else {
                continue;
            };
            let entry = acc.entry(entity).or_default();
            entry.kinds.push(kind);
            entry.labels.extend(literal_text(row, "label"));
            entry.comments.extend(literal_text(row, "comment"));
            entry.domains.extend(iri_value(row, "domain"));
            entry.ranges.extend(iri_value(row, "range"));
        }
        rows_read += rows.len();
        if rows.len() < page_size {
            break;
        }
    }
    Ok(acc
        .into_iter()
        .map(|(iri, a)| {
            let kind = a.kinds.iter().min().copied().expect("at least one row per entity");
            SchemaDocument::new(
                iri,
                kind,
                pick_preferred(&a.labels),
                pick_preferred(&a.comments),
                a.domains.into_iter().min(),
                a.ranges.into_iter().min(),
            )
        })
        .collect())
}

/// One labeled instance in one label language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledEntity {
    pub iri: Iri,
    pub label: String,
    /// Language tag of the label, `None` when untagged.
    pub language: Option<String>,
    pub comment: Option<String>,
}

/// Streams labeled instances page by page.
///
/// Yields each instance once per label language. Rows arrive ordered by
/// entity, so an entity is emitted as soon as the next one starts.
pub struct EntityHarvest<'a> {
    client: &'a SparqlClient,
    query: String,
    page_size: usize,
    rows_read: usize,
    exhausted: bool,
    failed: bool,
    ready: VecDeque<LabeledEntity>,
    current: Option<(Iri, LabelsByLanguage)>,
}

/// Labels and comments of one subject, keyed by language tag.
type LabelsByLanguage = BTreeMap<String, (Vec<String>, Vec<Tagged>)>;

pub fn harvest_entities<'a>(
    client: &'a SparqlClient,
    language: Option<&str>,
    page_size: usize,
) -> EntityHarvest<'a> {
    EntityHarvest {
        client,
        query: entity_query(language),
        page_size: page_size.max(1),
        rows_read: 0,
        exhausted: false,
        failed: false,
        ready: VecDeque::new(),
        current: None,
    }
}

impl EntityHarvest<'_> {
    fn flush_current(&mut self) {
        let Some((iri, by_lang)) = self.current.take() else {
            return;
        };
        for (lang, (labels, comments)) in by_lang {
            let Some(label) = labels.into_iter().min() else {
                continue;
            };
            let comment = comments
                .iter()
                .filter(|(_, l)| *l == lang)
                .map(|(c, _)| c)
                .min()
                .or_else(|| comments.iter().filter(|(_, l)| l.is_empty()).map(|(c, _)| c).min())
                .cloned();
            self.ready.push_back(LabeledEntity {
                iri: iri.clone(),
                label,
                language: (!lang.is_empty()).then_some(lang),
                comment,
            });
        }
    }

    fn absorb(&mut self, row: &Bindings) {
        let (Some(iri), Some((label, lang))) = (iri_value(row, "entity"), literal_text(row, "label"))
        else {
            return;
        };
        if label.trim().is_empty() {
            return;
        }
        if self.current.as_ref().is_some_and(|(cur, _)| *cur != iri) {
            self.flush_current();
        }
        let (_, by_lang) = self.current.get_or_insert_with(|| (iri, BTreeMap::new()));
        let slot = by_lang.entry(lang).or_default();
        slot.0.push(label);
        slot.1.extend(literal_text(row, "comment"));
    }

    fn fetch_page(&mut self) -> Result<(), HarvestError> {
        let page = self
            .client
            .select_all(&paged(&self.query, self.page_size, self.rows_read), None)
            .map_err(|source| HarvestError {
                rows_read: self.rows_read,
                source,
            })?;
        let rows = page.rows();
        for row in rows {
            self.absorb(row);
        }
        self.rows_read += rows.len();
        if rows.len() < self.page_size {
            self.exhausted = true;
            self.flush_current();
        }
        Ok(())
    }
}

impl Iterator for EntityHarvest<'_> {
    type Item = Result<LabeledEntity, HarvestError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(item) = self.ready.pop_front() {
                return Some(Ok(item));
            }
            if self.exhausted || self.failed {
                return None;
            }
            if let Err(e) = self.fetch_page() {
                self.failed = true;
                return Some(Err(e));
            }
        }
    }
}
