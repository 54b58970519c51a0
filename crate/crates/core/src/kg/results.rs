//! SPARQL 1.1 Query Results JSON format.

use std::collections::BTreeMap;

use serde::Deserialize;

use super::term::{Iri, RdfTerm};

pub type Bindings = BTreeMap<String, RdfTerm>;

#[derive(Debug, Clone, PartialEq)]
pub enum ResultBody {
    Rows(Vec<Bindings>),
    Boolean(bool),
}

/// Parsed results of a query: a table of bindings (SELECT) or a boolean (ASK).
#[derive(Debug, Clone, PartialEq)]
pub struct SparqlResultSet {
    pub variables: Vec<String>,
    pub body: ResultBody,
    /// Row count reported by the endpoint when it exceeded the row cap.
    pub truncated_from: Option<usize>,
}

impl SparqlResultSet {
    pub fn boolean(value: bool) -> Self {
        Self {
            variables: Vec::new(),
            body: ResultBody::Boolean(value),
            truncated_from: None,
        }
    }

    pub fn rows(&self) -> &[Bindings] {
        match &self.body {
            ResultBody::Rows(rows) => rows,
            ResultBody::Boolean(_) => &[],
        }
    }

    pub fn as_boolean(&self) -> Option<bool> {
        match self.body {
            ResultBody::Boolean(b) => Some(b),
            ResultBody::Rows(_) => None,
        }
    }

    pub fn is_truncated(&self) -> bool {
        self.truncated_from.is_some()
    }

    /// Keeps at most `max_rows` rows, remembering the original count.
    pub fn cap_rows(mut self, max_rows: usize) -> Self {
        if let ResultBody::Rows(rows) = &mut self.body {
            if rows.len() > max_rows {
                self.truncated_from = Some(rows.len());
                rows.truncate(max_rows);
            }
        }
        self
    }
}

#[derive(Deserialize)]
struct JsonDocument {
    head: JsonHead,
    results: Option<JsonResults>,
    boolean: Option<bool>,
}

#[derive(Deserialize)]
struct JsonHead {
    #[serde(default)]
    vars: Vec<String>,
}

#[derive(Deserialize)]
struct JsonResults {
    bindings: Vec<BTreeMap<String, JsonTerm>>,
}

#[derive(Deserialize)]
struct JsonTerm {
    #[serde(rename = "type")]
    kind: String,
    value: String,
    #[serde(rename = "xml:lang")]
    lang: Option<String>,
    datatype: Option<String>,
}

const RDF_LANG_STRING: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#langString";

/// Parses a `application/sparql-results+json` document.
///
/// The error string describes the first structural problem found.
pub fn parse_results_json(body: &str) -> Result<SparqlResultSet, String> {
    let doc: JsonDocument = serde_json::from_str(body).map_err(|e| e.to_string())?;
    match (doc.results, doc.boolean) {
        (Some(_), Some(_)) => Err("document has both `results` and `boolean`".into()),
        (None, None) => Err("document has neither `results` nor `boolean`".into()),
        (None, Some(b)) => Ok(SparqlResultSet::boolean(b)),
        (Some(results), None) => {
            let variables = doc.head.vars;
            let mut rows = Vec::with_capacity(results.bindings.len());
            for raw in results.bindings {
                let mut row = Bindings::new();
                for (var, term) in raw {
                    if !variables.contains(&var) {
                        return Err(format!("binding for undeclared variable `{var}`"));
                    }
                    row.insert(var, convert_term(term)?);
                }
                rows.push(row);
            }
            Ok(SparqlResultSet {
                variables,
                body: ResultBody::Rows(rows),
                truncated_from: None,
            })
        }
    }
}

fn convert_term(term: JsonTerm) -> Result<RdfTerm, String> {
    match term.kind.as_str() {
        "uri" => Iri::parse(&term.value)
            .map(RdfTerm::Iri)
            .map_err(|e| e.to_string()),
        "bnode" => Ok(RdfTerm::Blank(term.value)),
        "literal" | "typed-literal" => match (term.lang, term.datatype) {
            (Some(lang), _) => Ok(RdfTerm::lang(term.value, lang)),
            (None, Some(dt)) if dt == RDF_LANG_STRING => {
                Err("rdf:langString literal without a language tag".into())
            }
            (None, Some(dt)) => Iri::parse(&dt)
                .map(|dt| RdfTerm::typed(term.value, dt))
                .map_err(|e| e.to_string()),
            (None, None) => Ok(RdfTerm::plain(term.value)),
        },
        other => Err(format!("unsupported term type `{other}`")),
    }
}
