use super::{ActionInvocation, ChatMessage};

const CONTROLLER_SYSTEM: &str = include_str!("../../templates/controller_system.txt");
const CONTROLLER_USER: &str = include_str!("../../templates/controller_user.txt");
const EXTRACTION_SYSTEM: &str = include_str!("../../templates/extraction_system.txt");
const EXTRACTION_USER: &str = include_str!("../../templates/extraction_user.txt");

const EMPTY_HISTORY: &str = "(no actions taken yet)";

/// One completed thought/action/observation round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistoryEntry {
    pub thought: String,
    pub action: ActionInvocation,
    pub observation: String,
}

/// Replaces `{{name}}` slots in one pass; substituted text is never
/// rescanned, so values may contain braces.
fn fill(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        match after.find("}}").and_then(|end| {
            let name = after[..end].trim();
            slots.iter().find(|(k, _)| *k == name).map(|(_, v)| (end, *v))
        }) {
            Some((end, value)) => {
                out.push_str(value);
                rest = &after[end + 2..];
            }
            None => {
                out.push_str("{{");
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Steps separated by blank lines, each as `Thought:`/`Action:`/`Observation:`.
pub fn render_history(history: &[HistoryEntry]) -> String {
    history
        .iter()
        .map(|h| format!("Thought: {}\nAction: {}\nObservation: {}", h.thought.trim(), h.action, h.observation))
        .collect::<Vec<_>>()
        .join("\n\n")
}

pub fn render_controller_prompt(
    dataset: &str,
    question: &str,
    language: &str,
    history: &[HistoryEntry],
) -> Vec<ChatMessage> {
    let rendered = if history.is_empty() {
        EMPTY_HISTORY.to_string()
    } else {
        render_history(history)
    };
    vec![
        ChatMessage::system(fill(CONTROLLER_SYSTEM, &[("dataset", dataset)]).trim_end()),
        ChatMessage::user(
            fill(
                CONTROLLER_USER,
                &[("question", question), ("language", language), ("history", &rendered)],
            )
            .trim_end(),
        ),
    ]
}

pub fn render_extraction_prompt(dataset: &str, question: &str, history: &[HistoryEntry]) -> Vec<ChatMessage> {
    let trace = render_history(history);
    vec![
        ChatMessage::system(fill(EXTRACTION_SYSTEM, &[("dataset", dataset)]).trim_end()),
        ChatMessage::user(fill(EXTRACTION_USER, &[("question", question), ("trace", &trace)]).trim_end()),
    ]
}
