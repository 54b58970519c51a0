use std::sync::OnceLock;

use regex::Regex;

use super::{ActionInvocation, ActionKind, ControllerDecision};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("no action found in controller output")]
    NoActionFound(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no SPARQL query found in text")]
pub struct NoQueryFound;

/// A candidate invocation: where its line starts, the kind, and the byte
/// range of the argument plus the end of the invocation.
struct Candidate {
    line_start: usize,
    kind: ActionKind,
    arg_start: usize,
    arg_end: usize,
    end: usize,
}

fn skip_decoration(s: &str, mut i: usize) -> usize {
    while let Some(c) = s[i..].chars().next() {
        if matches!(c, ' ' | '\t' | '*' | '`') {
            i += c.len_utf8();
        } else {
            break;
        }
    }
    i
}

fn candidate_at(text: &str, line_start: usize) -> Option<Candidate> {
    let mut i = skip_decoration(text, line_start);
    let head = &text[i..];
    if head.get(..6).is_some_and(|h| h.eq_ignore_ascii_case("action")) {
        let after = head[6..].trim_start_matches([' ', '\t']);
        if let Some(rest) = after.strip_prefix(':') {
            i = text.len() - rest.len();
            i = skip_decoration(text, i);
        }
    }
    let head = &text[i..];
    let kind = ActionKind::ALL.into_iter().find(|k| {
        let name = k.as_str();
        head.len() >= name.len() && head.is_char_boundary(name.len()) && head[..name.len()].eq_ignore_ascii_case(name)
    })?;
    let after_name = i + kind.as_str().len();
    let open = after_name + text[after_name..].len() - text[after_name..].trim_start_matches([' ', '\t']).len();
    if !text[open..].starts_with('(') {
        return None;
    }
    let arg_start = open + 1;
    let mut depth = 1usize;
    for (off, c) in text[arg_start..].char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    let arg_end = arg_start + off;
                    return Some(Candidate {
                        line_start,
                        kind,
                        arg_start,
                        arg_end,
                        end: arg_end + 1,
                    });
                }
            }
            _ => {}
        }
    }
    // Unbalanced: take everything up to the last closing parenthesis, or
    // the rest of the text when there is none.
    let arg_end = text[arg_start..].rfind(')').map_or(text.len(), |p| arg_start + p);
    Some(Candidate {
        line_start,
        kind,
        arg_start,
        arg_end,
        end: text.len(),
    })
}

fn strip_fences(s: &str) -> &str {
    let mut s = s.trim();
    if let Some(rest) = s.strip_prefix("```") {
        // Drop an info string such as `sparql` on the opening fence line.
        s = match rest.find('\n') {
            Some(nl) if !rest[..nl].trim().contains(' ') => &rest[nl + 1..],
            _ => rest,
        };
        s = s.trim_end();
        s = s.strip_suffix("```").unwrap_or(s);
    }
    s.trim()
}

fn strip_quotes(s: &str) -> &str {
    for q in ['"', '\'', '`'] {
        if s.len() >= 2 && s.starts_with(q) && s.ends_with(q) {
            return s[1..s.len() - 1].trim();
        }
    }
    s
}

fn clean_thought(s: &str) -> String {
    let lines: Vec<&str> = s
        .lines()
        .filter(|l| !l.trim().starts_with("```"))
        .collect();
    let joined = lines.join("\n");
    let t = joined.trim();
    let t = if t.get(..8).is_some_and(|h| h.eq_ignore_ascii_case("thought:")) {
        &t[8..]
    } else {
        t
    };
    t.trim().to_string()
}

/// Finds the action invocation in a controller reply.
///
/// The invocation is the last line that starts (after an optional
/// `Action:` prefix and markdown decoration) with an action name followed
/// by `(`. Its argument runs to the balancing `)`, counted by depth, so
/// multi-line SPARQL with nested parentheses survives intact. Lines inside
/// an earlier invocation's argument are not candidates. Code fences and
/// one pair of surrounding quotes are stripped from the argument; the
/// thought is everything before the invocation line.
pub fn parse_controller_output(text: &str) -> Result<ControllerDecision, ParseError> {
    let starts = std::iter::once(0).chain(text.match_indices('\n').map(|(i, _)| i + 1));
    let mut chosen: Option<Candidate> = None;
    let mut covered_until = 0usize;
    for start in starts {
        if start < covered_until || start > text.len() {
            continue;
        }
        if let Some(c) = candidate_at(text, start) {
            covered_until = c.end;
            chosen = Some(c);
        }
    }
    let c = chosen.ok_or_else(|| ParseError::NoActionFound(text.to_string()))?;
    let raw = &text[c.arg_start..c.arg_end];
    let argument = strip_quotes(strip_fences(raw)).to_string();
    Ok(ControllerDecision {
        thought: clean_thought(&text[..c.line_start]),
        action: ActionInvocation::new(c.kind, argument),
    })
}

fn query_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?is)\b(?:(?:PREFIX\s+[A-Za-z0-9_.\-]*:\s*<[^>\s]*>|BASE\s*<[^>\s]*>)\s*)*(?:SELECT\s+(?:DISTINCT\s+|REDUCED\s+)?(?:\?|\$|\*|\()|ASK\s*(?:\{|WHERE\b|FROM\b)|CONSTRUCT\s*(?:\{|WHERE\b|FROM\b)|DESCRIBE\s+(?:\?|\$|<|\*|[A-Za-z_][\w\-]*:))",
        )
        .expect("valid query pattern")
    })
}

fn fence_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?s)```[^\n`]*\n(.*?)```").expect("valid fence pattern"))
}

/// Pulls the first SPARQL query out of a free-text reply.
///
/// A query starts at its prologue (`PREFIX`/`BASE`) or at its form keyword
/// and runs to the end of the enclosing code fence, or to the end of the
/// text when it is not fenced.
pub fn extract_sparql_text(text: &str) -> Result<String, NoQueryFound> {
    for block in fence_pattern().captures_iter(text) {
        let body = block.get(1).expect("group 1").as_str();
        if let Some(m) = query_pattern().find(body) {
            return Ok(body[m.start()..].trim().to_string());
        }
    }
    let m = query_pattern().find(text).ok_or(NoQueryFound)?;
    let tail = &text[m.start()..];
    let tail = match tail.find("```") {
        Some(p) => &tail[..p],
        None => tail,
    };
    let q = tail.trim();
    if q.is_empty() {
        Err(NoQueryFound)
    } else {
        Ok(q.to_string())
    }
}
