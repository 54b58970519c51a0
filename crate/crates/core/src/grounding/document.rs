use std::fmt;

use serde::{Deserialize, Serialize};

use crate::kg::Iri;

const OWL: &str = "http://www.w3.org/2002/07/owl#";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SchemaKind {
    Class,
    ObjectProperty,
    DatatypeProperty,
}

impl SchemaKind {
    pub fn from_owl_type(iri: &Iri) -> Option<Self> {
        match iri.as_str().strip_prefix(OWL)? {
            "Class" => Some(SchemaKind::Class),
            "ObjectProperty" => Some(SchemaKind::ObjectProperty),
            "DatatypeProperty" => Some(SchemaKind::DatatypeProperty),
            _ => None,
        }
    }

    pub fn is_property(self) -> bool {
        !matches!(self, SchemaKind::Class)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SchemaKind::Class => "class",
            SchemaKind::ObjectProperty => "objectProperty",
            SchemaKind::DatatypeProperty => "datatypeProperty",
        }
    }
}

impl fmt::Display for SchemaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which schema entities a hybrid search may return.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KindFilter {
    Classes,
    /// Object and datatype properties.
    Properties,
    Exactly(SchemaKind),
}

impl KindFilter {
    pub fn accepts(self, kind: SchemaKind) -> bool {
        match self {
            KindFilter::Classes => kind == SchemaKind::Class,
            KindFilter::Properties => kind.is_property(),
            KindFilter::Exactly(k) => k == kind,
        }
    }
}

/// One schema entity prepared for indexing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaDocument {
    pub iri: Iri,
    pub kind: SchemaKind,
    pub label: String,
    pub comment: Option<String>,
    pub domain: Option<Iri>,
    pub range: Option<Iri>,
    /// `label`, then a space and `comment` when there is one.
    pub text: String,
}

impl SchemaDocument {
    /// Builds a document; a missing or blank label falls back to the IRI's
    /// local name.
    pub fn new(
        iri: Iri,
        kind: SchemaKind,
        label: Option<String>,
        comment: Option<String>,
        domain: Option<Iri>,
        range: Option<Iri>,
    ) -> Self {
        let label = label
            .map(|l| l.trim().to_string())
            .filter(|l| !l.is_empty())
            .unwrap_or_else(|| iri.local_name().to_string());
        let comment = comment.map(|c| c.trim().to_string()).filter(|c| !c.is_empty());
        let text = match &comment {
            Some(c) => format!("{label} {c}"),
            None => label.clone(),
        };
        Self {
            iri,
            kind,
            label,
            comment,
            domain,
            range,
            text,
        }
    }
}

/// One instance prepared for the full-text entity index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityIndexEntry {
    pub iri: Iri,
    pub name: String,
    pub description: Option<String>,
}

impl EntityIndexEntry {
    pub fn new(iri: Iri, name: impl Into<String>, description: Option<String>) -> Self {
        Self {
            iri,
            name: name.into(),
            description,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum MatchKind {
    Schema(SchemaKind),
    Instance,
}

impl fmt::Display for MatchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatchKind::Schema(k) => k.fmt(f),
            MatchKind::Instance => f.write_str("instance"),
        }
    }
}

/// A ranked retrieval hit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredMatch {
    pub iri: Iri,
    pub label: String,
    pub kind: MatchKind,
    pub score: f64,
    /// 1-based rank in the dense arm, if the hit was a dense candidate.
    pub dense_rank: Option<usize>,
    /// 1-based rank in the sparse arm, if the hit was a sparse candidate.
    pub sparse_rank: Option<usize>,
    pub description: Option<String>,
    pub domain: Option<Iri>,
    pub range: Option<Iri>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iri(s: &str) -> Iri {
        Iri::parse(s).unwrap()
    }

    #[test]
    fn text_concatenates_label_and_comment() {
        let d = SchemaDocument::new(
            iri("http://dbpedia.org/ontology/populationTotal"),
            SchemaKind::DatatypeProperty,
            Some("population total".into()),
            Some("The total number of inhabitants.".into()),
            None,
            None,
        );
        assert_eq!(d.text, "population total The total number of inhabitants.");
        let d = SchemaDocument::new(iri("http://ex.org/p"), SchemaKind::ObjectProperty, Some("p".into()), None, None, None);
        assert_eq!(d.text, "p");
    }

    #[test]
    fn unlabeled_entities_use_local_name() {
        let d = SchemaDocument::new(iri("http://ex.org/v#weightKg"), SchemaKind::DatatypeProperty, None, None, None, None);
        assert_eq!((d.label.as_str(), d.text.as_str()), ("weightKg", "weightKg"));
        let d = SchemaDocument::new(
            iri("http://ex.org/v/Product"),
            SchemaKind::Class,
            Some("  ".into()),
            Some("Things we sell.".into()),
            None,
            None,
        );
        assert_eq!(d.text, "Product Things we sell.");
    }

    #[test]
    fn owl_types_and_filters() {
        let t = |s: &str| SchemaKind::from_owl_type(&iri(&format!("{OWL}{s}")));
        assert_eq!(t("Class"), Some(SchemaKind::Class));
        assert_eq!(t("DatatypeProperty"), Some(SchemaKind::DatatypeProperty));
        assert_eq!(t("Thing"), None);
        assert!(KindFilter::Properties.accepts(SchemaKind::ObjectProperty));
        assert!(!KindFilter::Properties.accepts(SchemaKind::Class));
        assert!(KindFilter::Classes.accepts(SchemaKind::Class));
        assert!(!KindFilter::Exactly(SchemaKind::ObjectProperty).accepts(SchemaKind::DatatypeProperty));
    }
}
