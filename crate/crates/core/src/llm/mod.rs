//! Chat backends, prompt templates and the controller's text protocol.
//!
//! The controller answers in plain text: a free-form thought followed by a
//! line `Action: name(argument)`. [`parse_controller_output`] turns that into
//! a [`ControllerDecision`].

mod backend;
mod parse;
mod prompt;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use backend::{ChatBackend, ClosureChat, LlmConfig, LlmError, RemoteChat, ScriptedChat};
pub use parse::{extract_sparql_text, parse_controller_output, NoQueryFound, ParseError};
pub use prompt::{render_controller_prompt, render_extraction_prompt, render_history, HistoryEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// The seven controller actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    GetKnowledgegraphEntry,
    SearchEntityByLabel,
    SearchPropertyByLabel,
    SearchClassByLabel,
    GetPropertyExamples,
    ExecuteSparql,
    Stop,
}

impl ActionKind {
    pub const ALL: [ActionKind; 7] = [
        ActionKind::GetKnowledgegraphEntry,
        ActionKind::SearchEntityByLabel,
        ActionKind::SearchPropertyByLabel,
        ActionKind::SearchClassByLabel,
        ActionKind::GetPropertyExamples,
        ActionKind::ExecuteSparql,
        ActionKind::Stop,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::GetKnowledgegraphEntry => "get_knowledgegraph_entry",
            ActionKind::SearchEntityByLabel => "search_entity_by_label",
            ActionKind::SearchPropertyByLabel => "search_property_by_label",
            ActionKind::SearchClassByLabel => "search_class_by_label",
            ActionKind::GetPropertyExamples => "get_property_examples",
            ActionKind::ExecuteSparql => "execute_sparql",
            ActionKind::Stop => "stop",
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown action {0:?}")]
pub struct UnknownAction(pub String);

impl FromStr for ActionKind {
    type Err = UnknownAction;

    /// Case-insensitive.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActionKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownAction(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionInvocation {
    pub kind: ActionKind,
    /// Always empty for `stop`.
    pub argument: String,
}

impl ActionInvocation {
    pub fn new(kind: ActionKind, argument: impl Into<String>) -> Self {
        let argument = if kind == ActionKind::Stop {
            String::new()
        } else {
            argument.into()
        };
        Self { kind, argument }
    }

    pub fn stop() -> Self {
        Self::new(ActionKind::Stop, "")
    }
}

impl fmt::Display for ActionInvocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.kind, self.argument)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControllerDecision {
    pub thought: String,
    pub action: ActionInvocation,
}
