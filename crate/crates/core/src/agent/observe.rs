//! Plain-text observations fed back to the controller.

use crate::grounding::{GroundingError, HybridResult, ScoredMatch};
use crate::kg::{EntityExcerpt, Iri, KgError, RdfTerm, SparqlResultSet};

pub(crate) const REPEAT_NOTICE: &str = "You already performed this exact action earlier and it would return the same \
result. Choose a different action.";

pub(crate) const PREMATURE_STOP_NOTICE: &str = "stop() was rejected: stop is only accepted directly after \
execute_sparql. Run your final query with execute_sparql first, then call stop().";

pub(crate) const PARSE_FAILURE_NOTICE: &str = "Your reply did not contain an action. Reply with exactly one \
\"Thought:\" line and one line of the form `Action: name(argument)` using one of the listed actions.";

/// Cuts `text` to at most `max_chars` characters, notice included.
pub fn cap_observation(text: String, max_chars: usize) -> String {
    if text.chars().count() <= max_chars {
        return text;
    }
    let notice = format!("\n[observation truncated to {max_chars} characters]");
    let keep = max_chars.saturating_sub(notice.chars().count());
    let mut out: String = text.chars().take(keep).collect();
    out.push_str(&notice);
    out
}

fn one_line(text: &str, max_chars: usize) -> String {
    let flat = crate::text::collapse_whitespace(text);
    if flat.chars().count() <= max_chars {
        flat
    } else {
        let mut s: String = flat.chars().take(max_chars).collect();
        s.push_str("...");
        s
    }
}

pub(crate) fn kg_error(e: &KgError) -> String {
    match e {
        KgError::Syntax(_) => e.to_string(),
        other => format!("Endpoint error ({}): {other}", other.kind()),
    }
}

pub(crate) fn grounding_error(e: &GroundingError) -> String {
    format!("Search failed: {e}")
}

pub(crate) fn entity_hits(query: &str, hits: &[ScoredMatch]) -> String {
    if hits.is_empty() {
        return format!("No entities found for \"{query}\".");
    }
    let mut out = format!("Entities matching \"{query}\":");
    for (i, h) in hits.iter().enumerate() {
        out.push_str(&format!("\n{}. <{}> \"{}\"", i + 1, h.iri, one_line(&h.label, 200)));
        if let Some(d) = h.description.as_deref().filter(|d| !d.trim().is_empty()) {
            out.push_str(&format!(" - {}", one_line(d, 300)));
        }
    }
    out
}

pub(crate) fn schema_hits(query: &str, what: &str, result: &HybridResult) -> String {
    let mut out = if result.matches.is_empty() {
        format!("No {what} found for \"{query}\".")
    } else {
        let mut s = format!("{} matching \"{query}\":", capitalize(what));
        for (i, h) in result.matches.iter().enumerate() {
            s.push_str(&format!("\n{}. <{}> \"{}\" ({})", i + 1, h.iri, one_line(&h.label, 200), h.kind));
            if let Some(d) = &h.domain {
                s.push_str(&format!(" domain <{d}>"));
            }
            if let Some(r) = &h.range {
                s.push_str(&format!(" range <{r}>"));
            }
            if let Some(c) = h.description.as_deref().filter(|c| !c.trim().is_empty()) {
                s.push_str(&format!(" - {}", one_line(c, 300)));
            }
        }
        s
    };
    if result.dense_degraded {
        out.push_str("\n(lexical matching only; semantic search is unavailable)");
    }
    out
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next()
        .map(|f| f.to_uppercase().chain(c).collect())
        .unwrap_or_default()
}

pub(crate) fn excerpt(e: &EntityExcerpt, max_edges: usize) -> String {
    if e.edges.is_empty() {
        return format!("No outgoing edges found for <{}>. It may not exist in the knowledge graph.", e.subject);
    }
    let shown = e.edges.len().min(max_edges);
    let mut out = format!("Outgoing edges of <{}>:", e.subject);
    for (p, o) in &e.edges[..shown] {
        out.push_str(&format!("\n<{p}> {}", term(o)));
    }
    if e.truncated || shown < e.edges.len() {
        out.push_str(&format!("\n[only the first {shown} edges are shown]"));
    }
    out
}

pub(crate) fn property_examples(property: &Iri, pairs: &[(RdfTerm, RdfTerm)]) -> String {
    if pairs.is_empty() {
        return format!("No usage examples found for <{property}>.");
    }
    let mut out = format!("Usage examples of <{property}>:");
    for (s, o) in pairs {
        out.push_str(&format!("\n{} <{property}> {}", term(s), term(o)));
    }
    out
}

fn term(t: &RdfTerm) -> String {
    let s = t.to_string();
    if s.chars().count() > 300 {
        s.chars().take(300).collect::<String>() + "..."
    } else {
        s
    }
}

pub(crate) fn results(r: &SparqlResultSet, max_rows: usize) -> String {
    if let Some(b) = r.as_boolean() {
        return format!("ASK result: {b}");
    }
    let rows = r.rows();
    if rows.is_empty() {
        return "The query returned no results.".to_string();
    }
    let total = r.truncated_from.unwrap_or(rows.len());
    let shown = rows.len().min(max_rows);
    let mut out = format!("{total} row{} returned", if total == 1 { "" } else { "s" });
    if shown < total {
        out.push_str(&format!(", first {shown} shown"));
    }
    out.push(':');
    for (i, row) in rows[..shown].iter().enumerate() {
        let cells: Vec<String> = r
            .variables
            .iter()
            .map(|v| match row.get(v) {
                Some(t) => format!("?{v}={}", term(t)),
                None => format!("?{v}=(unbound)"),
            })
            .collect();
        out.push_str(&format!("\n{}. {}", i + 1, cells.join(", ")));
    }
    out
}
