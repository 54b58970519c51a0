use std::fmt;

use serde::{Deserialize, Serialize};

/// An absolute IRI, stored without angle brackets.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Iri(String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("not an absolute IRI: {0:?}")]
pub struct InvalidIri(pub String);

impl Iri {
    /// Parses an absolute IRI. A single pair of surrounding angle brackets
    /// and surrounding whitespace are accepted and stripped.
    pub fn parse(input: &str) -> Result<Self, InvalidIri> {
        let trimmed = input.trim();
        let inner = trimmed
            .strip_prefix('<')
            .and_then(|s| s.strip_suffix('>'))
            .unwrap_or(trimmed);
        if is_absolute_iri(inner) {
            Ok(Self(inner.to_string()))
        } else {
            Err(InvalidIri(input.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// SPARQL/Turtle form, `<...>`.
    pub fn to_sparql(&self) -> String {
        format!("<{}>", self.0)
    }

    /// The part after the last `#`, `/` or `:`; falls back to the whole IRI.
    pub fn local_name(&self) -> &str {
        let s = self.0.trim_end_matches(['/', '#']);
        match s.rfind(['#', '/', ':']) {
            Some(i) if i + 1 < s.len() => &s[i + 1..],
            _ => &self.0,
        }
    }
}

fn is_absolute_iri(s: &str) -> bool {
    let Some((scheme, rest)) = s.split_once(':') else {
        return false;
    };
    let mut chars = scheme.chars();
    let scheme_ok = chars.next().is_some_and(|c| c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'));
    scheme_ok
        && !rest.is_empty()
        && !s
            .chars()
            .any(|c| c.is_whitespace() || matches!(c, '<' | '>' | '"' | '{' | '}' | '|' | '^' | '`' | '\\'))
}

impl TryFrom<String> for Iri {
    type Error = InvalidIri;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Iri::parse(&value)
    }
}

impl From<Iri> for String {
    fn from(iri: Iri) -> Self {
        iri.0
    }
}

impl fmt::Display for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// How a literal is qualified. Language tag and datatype exclude each other.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LiteralAnnotation {
    Plain,
    Language(String),
    Datatype(Iri),
}

/// An RDF term as it appears in SPARQL results.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RdfTerm {
    Iri(Iri),
    Literal {
        lexical: String,
        annotation: LiteralAnnotation,
    },
    Blank(String),
}

impl RdfTerm {
    pub fn plain(lexical: impl Into<String>) -> Self {
        RdfTerm::Literal {
            lexical: lexical.into(),
            annotation: LiteralAnnotation::Plain,
        }
    }

    pub fn lang(lexical: impl Into<String>, tag: impl Into<String>) -> Self {
        RdfTerm::Literal {
            lexical: lexical.into(),
            annotation: LiteralAnnotation::Language(tag.into().to_ascii_lowercase()),
        }
    }

    pub fn typed(lexical: impl Into<String>, datatype: Iri) -> Self {
        RdfTerm::Literal {
            lexical: lexical.into(),
            annotation: LiteralAnnotation::Datatype(datatype),
        }
    }

    /// IRI string, literal lexical form or blank node label.
    pub fn lexical(&self) -> &str {
        match self {
            RdfTerm::Iri(iri) => iri.as_str(),
            RdfTerm::Literal { lexical, .. } => lexical,
            RdfTerm::Blank(id) => id,
        }
    }

    pub fn language(&self) -> Option<&str> {
        match self {
            RdfTerm::Literal {
                annotation: LiteralAnnotation::Language(tag),
                ..
            } => Some(tag),
            _ => None,
        }
    }

    pub fn datatype(&self) -> Option<&Iri> {
        match self {
            RdfTerm::Literal {
                annotation: LiteralAnnotation::Datatype(dt),
                ..
            } => Some(dt),
            _ => None,
        }
    }

    pub fn as_iri(&self) -> Option<&Iri> {
        match self {
            RdfTerm::Iri(iri) => Some(iri),
            _ => None,
        }
    }
}

/// N-Triples style rendering.
impl fmt::Display for RdfTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RdfTerm::Iri(iri) => write!(f, "<{iri}>"),
            RdfTerm::Blank(id) => write!(f, "_:{id}"),
            RdfTerm::Literal { lexical, annotation } => {
                write!(f, "\"")?;
                for c in lexical.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\r' => f.write_str("\\r")?,
                        c => write!(f, "{c}")?,
                    }
                }
                write!(f, "\"")?;
                match annotation {
                    LiteralAnnotation::Plain => Ok(()),
                    LiteralAnnotation::Language(tag) => write!(f, "@{tag}"),
                    LiteralAnnotation::Datatype(dt) => write!(f, "^^<{dt}>"),
                }
            }
        }
    }
}
