//! The ReAct controller: one thought and one action per iteration until
//! the model stops after executing its final query, or a limit is hit.

mod language;
mod observe;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::grounding::{EmbeddingProvider, EntityIndex, HybridParams, KindFilter, SchemaIndex};
use crate::kg::{Iri, SparqlClient};
use crate::llm::{
    extract_sparql_text, parse_controller_output, render_controller_prompt, render_extraction_prompt, ActionInvocation,
    ActionKind, ChatBackend, ChatMessage, ControllerDecision, HistoryEntry, LlmError,
};
use crate::text::collapse_whitespace;
use crate::tracelab::{Origin, RunRecord};

pub use language::{detect_language, ENGLISH_STOPWORDS, SPANISH_STOPWORDS};
pub use observe::cap_observation;

/// Everything the agent needs to work against one knowledge graph.
#[derive(Clone)]
pub struct DatasetRef {
    /// Dataset identifier used by clients, usually a URL.
    pub id: String,
    /// Name used in prompts, e.g. `DBpedia`.
    pub name: String,
    pub client: SparqlClient,
    pub schema_index: Arc<SchemaIndex>,
    pub embedder: Arc<dyn EmbeddingProvider>,
    /// Entity indexes keyed by language tag.
    pub entity_indexes: BTreeMap<String, Arc<EntityIndex>>,
    /// Index used when the question's language has none.
    pub default_language: String,
    /// When set, every question is routed to this language regardless of
    /// what it is written in.
    pub fixed_language: Option<String>,
}

impl DatasetRef {
    pub fn new(
        id: impl Into<String>,
        name: impl Into<String>,
        client: SparqlClient,
        schema_index: Arc<SchemaIndex>,
        embedder: Arc<dyn EmbeddingProvider>,
    ) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
            client,
            schema_index,
            embedder,
            entity_indexes: BTreeMap::new(),
            default_language: "en".to_string(),
            fixed_language: None,
        }
    }

    pub fn with_entity_index(mut self, language: impl Into<String>, index: Arc<EntityIndex>) -> Self {
        self.entity_indexes.insert(language.into(), index);
        self
    }

    pub fn with_default_language(mut self, language: impl Into<String>) -> Self {
        self.default_language = language.into();
        self
    }

    pub fn with_fixed_language(mut self, language: impl Into<String>) -> Self {
        self.fixed_language = Some(language.into());
        self
    }

    /// Language a question is routed to.
    pub fn route_language(&self, question: &str) -> String {
        match &self.fixed_language {
            Some(l) => l.clone(),
            None => detect_language(question).to_string(),
        }
    }

    fn entity_index(&self, language: &str) -> Option<&Arc<EntityIndex>> {
        self.entity_indexes
            .get(language)
            .or_else(|| self.entity_indexes.get(&self.default_language))
            .or_else(|| self.entity_indexes.values().next())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct AgentConfig {
    pub max_iterations: usize,
    /// Extra controller calls allowed when a reply has no parseable action.
    pub max_parse_retries: usize,
    /// Time kept back for fallback extraction.
    #[serde(with = "secs")]
    pub extraction_reserve: Duration,
    pub search_limit: usize,
    pub max_excerpt_edges: usize,
    pub max_result_rows: usize,
    pub max_observation_chars: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            max_iterations: 15,
            max_parse_retries: 2,
            extraction_reserve: Duration::from_secs(60),
            search_limit: 10,
            max_excerpt_edges: 100,
            max_result_rows: 30,
            max_observation_chars: 8000,
        }
    }
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceStep {
    /// 1-based.
    pub index: usize,
    pub thought: String,
    pub action: ActionInvocation,
    pub observation: String,
    pub duration_ms: u64,
    /// The action repeated an earlier one and was not executed.
    pub was_repeat_intercepted: bool,
    /// A `stop` that was not accepted.
    pub rejected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Termination {
    Stopped,
    IterationLimit,
    BudgetExhausted,
    RepeatedPrematureStop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AgentOutcome {
    /// `None` when no query could be produced at all.
    pub final_query: Option<String>,
    pub origin: Origin,
    pub termination: Termination,
    pub trace: Vec<TraceStep>,
    /// Controller turns used, including those whose reply never parsed.
    pub iterations: usize,
    pub language: String,
    pub total_duration_ms: u64,
    #[serde(skip)]
    elapsed: Duration,
}

impl AgentOutcome {
    /// Actions as logged: rejected stops are left out.
    pub fn logged_actions(&self) -> Vec<ActionKind> {
        self.trace.iter().filter(|s| !s.rejected).map(|s| s.action.kind).collect()
    }

    pub fn to_run_record(&self, run_id: impl Into<String>, dataset_name: &str, question: &str) -> RunRecord {
        RunRecord::new(
            run_id,
            dataset_name,
            question,
            self.language.clone(),
            self.logged_actions(),
            self.elapsed.as_secs_f64().max(1e-9),
            self.origin,
            self.final_query.clone().unwrap_or_default(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AgentError {
    #[error("question is empty")]
    EmptyQuestion,
    #[error("time budget must be positive")]
    ZeroBudget,
}

/// Mutable state of one run.
#[derive(Debug, Clone, Default)]
pub struct AgentState {
    pub language: String,
    pub steps: Vec<TraceStep>,
    pub iterations: usize,
    /// Argument of the most recent `execute_sparql` step.
    pub last_executed_query: Option<String>,
    pub rejected_stops: usize,
}

impl AgentState {
    fn history(&self) -> Vec<HistoryEntry> {
        self.steps
            .iter()
            .map(|s| HistoryEntry {
                thought: s.thought.clone(),
                action: s.action.clone(),
                observation: s.observation.clone(),
            })
            .collect()
    }

    fn push(&mut self, decision: ControllerDecision, observation: String, started: Instant, flags: (bool, bool)) {
        self.steps.push(TraceStep {
            index: self.steps.len() + 1,
            thought: decision.thought,
            action: decision.action,
            observation,
            duration_ms: started.elapsed().as_millis() as u64,
            was_repeat_intercepted: flags.0,
            rejected: flags.1,
        });
    }
}

/// True when `action` repeats an earlier executed or intercepted step:
/// same kind and the same argument after whitespace collapsing. `stop` is
/// never a repeat.
pub fn detect_repeat(steps: &[TraceStep], action: &ActionInvocation) -> bool {
    if action.kind == ActionKind::Stop {
        return false;
    }
    let arg = collapse_whitespace(&action.argument);
    steps
        .iter()
        .any(|s| !s.rejected && s.action.kind == action.kind && collapse_whitespace(&s.action.argument) == arg)
}

const KNOWN_PREFIXES: &[(&str, &str)] = &[
    ("dbr", "http://dbpedia.org/resource/"),
    ("dbo", "http://dbpedia.org/ontology/"),
    ("dbp", "http://dbpedia.org/property/"),
    ("rdf", "http://www.w3.org/1999/02/22-rdf-syntax-ns#"),
    ("rdfs", "http://www.w3.org/2000/01/rdf-schema#"),
    ("owl", "http://www.w3.org/2002/07/owl#"),
    ("xsd", "http://www.w3.org/2001/XMLSchema#"),
    ("foaf", "http://xmlns.com/foaf/0.1/"),
    ("skos", "http://www.w3.org/2004/02/skos/core#"),
];

/// Parses an IRI argument, expanding a few well-known prefixed names.
fn iri_argument(arg: &str) -> Option<Iri> {
    let arg = arg.trim().trim_matches(['"', '\'']);
    if let Some((prefix, local)) = arg.split_once(':') {
        if let Some((_, ns)) = KNOWN_PREFIXES.iter().find(|(p, _)| *p == prefix) {
            if !local.starts_with("//") {
                return Iri::parse(&format!("{ns}{local}")).ok();
            }
        }
    }
    Iri::parse(arg).ok()
}

struct Run<'a> {
    dataset: &'a DatasetRef,
    llm: &'a dyn ChatBackend,
    config: &'a AgentConfig,
    deadline: Instant,
}

impl Run<'_> {
    fn remaining(&self) -> Duration {
        self.deadline.saturating_duration_since(Instant::now())
    }

    /// Time a controller or endpoint call may take without eating into the
    /// extraction reserve.
    fn call_budget(&self) -> Duration {
        self.remaining()
            .saturating_sub(self.config.extraction_reserve)
            .max(Duration::from_millis(10))
    }

    fn out_of_time(&self) -> bool {
        self.remaining() <= self.config.extraction_reserve
    }

    /// Asks the controller for its next move, retrying unparseable replies.
    /// `None` when every attempt failed.
    fn decide(&self, question: &str, state: &AgentState) -> Option<ControllerDecision> {
        let mut messages =
            render_controller_prompt(&self.dataset.name, question, &state.language, &state.history());
        for attempt in 0..=self.config.max_parse_retries {
            if attempt > 0 && self.out_of_time() {
                return None;
            }
            match self.llm.complete(&messages, Some(self.call_budget())) {
                Ok(reply) => match parse_controller_output(&reply) {
                    Ok(d) => return Some(d),
                    Err(e) => {
                        tracing::debug!(attempt, "controller reply not parseable: {e}");
                        messages.push(ChatMessage::assistant(reply));
                        messages.push(ChatMessage::user(format!("Observation: {}", observe::PARSE_FAILURE_NOTICE)));
                    }
                },
                Err(e @ (LlmError::ScriptExhausted | LlmError::Config(_))) => {
                    tracing::warn!("controller unavailable: {e}");
                    return None;
                }
                Err(e) => {
                    tracing::warn!(attempt, "controller call failed: {e}");
                    messages.push(ChatMessage::user(format!(
                        "Observation: the previous request failed ({e}). Reply with one Thought and one Action."
                    )));
                }
            }
        }
        None
    }

    fn dispatch(&self, action: &ActionInvocation, state: &mut AgentState) -> String {
        let arg = action.argument.trim();
        let cfg = self.config;
        let text = match action.kind {
            ActionKind::SearchEntityByLabel => {
                if arg.is_empty() {
                    return "search_entity_by_label needs a non-empty label.".into();
                }
                match self.dataset.entity_index(&state.language) {
                    None => "No entity index is available for this knowledge graph.".into(),
                    Some(index) => match index.search(arg, cfg.search_limit) {
                        Ok(hits) => observe::entity_hits(arg, &hits),
                        Err(e) => observe::grounding_error(&e),
                    },
                }
            }
            ActionKind::SearchPropertyByLabel | ActionKind::SearchClassByLabel => {
                if arg.is_empty() {
                    return format!("{} needs a non-empty label.", action.kind);
                }
                let (filter, what) = if action.kind == ActionKind::SearchClassByLabel {
                    (KindFilter::Classes, "classes")
                } else {
                    (KindFilter::Properties, "properties")
                };
                match self.dataset.schema_index.hybrid_search(
                    arg,
                    self.dataset.embedder.as_ref(),
                    Some(filter),
                    cfg.search_limit,
                    HybridParams::default(),
                ) {
                    Ok(result) => observe::schema_hits(arg, what, &result),
                    Err(e) => observe::grounding_error(&e),
                }
            }
            ActionKind::GetKnowledgegraphEntry => match iri_argument(arg) {
                None => format!(
                    "get_knowledgegraph_entry expects a full IRI such as http://dbpedia.org/resource/Sufism, got \"{arg}\"."
                ),
                Some(iri) => match self.dataset.client.fetch_outgoing_edges(&iri, Some(self.call_budget())) {
                    Ok(excerpt) => observe::excerpt(&excerpt, cfg.max_excerpt_edges),
                    Err(e) => observe::kg_error(&e),
                },
            },
            ActionKind::GetPropertyExamples => match iri_argument(arg) {
                None => format!("get_property_examples expects a full property IRI, got \"{arg}\"."),
                Some(iri) => match self.dataset.client.fetch_property_examples(&iri, Some(self.call_budget())) {
                    Ok(pairs) => observe::property_examples(&iri, &pairs),
                    Err(e) => observe::kg_error(&e),
                },
            },
            ActionKind::ExecuteSparql => {
                state.last_executed_query = Some(action.argument.clone());
                if arg.is_empty() {
                    return "execute_sparql needs a SPARQL query.".into();
                }
                match self.dataset.client.execute_within(arg, Some(self.call_budget())) {
                    Ok(r) => observe::results(&r, cfg.max_result_rows),
                    Err(e) => observe::kg_error(&e),
                }
            }
            ActionKind::Stop => unreachable!("stop is handled by the loop"),
        };
        cap_observation(text, cfg.max_observation_chars)
    }

    fn extract(&self, question: &str, state: &AgentState) -> Option<String> {
        if state.steps.is_empty() {
            return None;
        }
        let prompt = render_extraction_prompt(&self.dataset.name, question, &state.history());
        let timeout = self.remaining().max(Duration::from_millis(10));
        match self.llm.complete(&prompt, Some(timeout)) {
            Ok(reply) => match extract_sparql_text(&reply) {
                Ok(q) => Some(q),
                Err(e) => {
                    tracing::warn!("fallback extraction found no query: {e}");
                    None
                }
            },
            Err(e) => {
                tracing::warn!("fallback extraction failed: {e}");
                None
            }
        }
    }
}

/// Answers `question` against `dataset` within `budget`.
///
/// A `stop` is honored only directly after an `execute_sparql` step, and
/// the final query is that step's argument. Otherwise the run ends by the
/// iteration limit, the budget, or a second premature stop, and the query
/// is extracted from the trace; if that fails the last executed query is
/// used.
pub fn run_agent(
    question: &str,
    dataset: &DatasetRef,
    llm: &dyn ChatBackend,
    config: &AgentConfig,
    budget: Duration,
) -> Result<AgentOutcome, AgentError> {
    if question.trim().is_empty() {
        return Err(AgentError::EmptyQuestion);
    }
    if budget.is_zero() {
        return Err(AgentError::ZeroBudget);
    }
    let started = Instant::now();
    let run = Run {
        dataset,
        llm,
        config,
        deadline: started + budget,
    };
    let mut state = AgentState {
        language: dataset.route_language(question),
        ..AgentState::default()
    };
    let mut termination = Termination::IterationLimit;

    while state.iterations < config.max_iterations {
        if run.out_of_time() {
            termination = Termination::BudgetExhausted;
            break;
        }
        state.iterations += 1;
        let step_started = Instant::now();
        let Some(decision) = run.decide(question, &state) else {
            continue;
        };

        if decision.action.kind == ActionKind::Stop {
            let after_execute = state
                .steps
                .last()
                .is_some_and(|s| s.action.kind == ActionKind::ExecuteSparql);
            if after_execute {
                state.push(decision, "Stopped.".into(), step_started, (false, false));
                termination = Termination::Stopped;
                break;
            }
            state.rejected_stops += 1;
            state.push(decision, observe::PREMATURE_STOP_NOTICE.into(), step_started, (false, true));
            if state.rejected_stops >= 2 {
                termination = Termination::RepeatedPrematureStop;
                break;
            }
            continue;
        }

        if detect_repeat(&state.steps, &decision.action) {
            if decision.action.kind == ActionKind::ExecuteSparql {
                state.last_executed_query = Some(decision.action.argument.clone());
            }
            state.push(decision, observe::REPEAT_NOTICE.into(), step_started, (true, false));
            continue;
        }

        let observation = run.dispatch(&decision.action, &mut state);
        state.push(decision, observation, step_started, (false, false));
    }

    let (final_query, origin) = if termination == Termination::Stopped {
        (state.last_executed_query.clone(), Origin::Stop)
    } else {
        let q = run.extract(question, &state).or_else(|| state.last_executed_query.clone());
        (q, Origin::FallbackExtraction)
    };
    let final_query = final_query.filter(|q| !q.trim().is_empty());

    let elapsed = started.elapsed();
    Ok(AgentOutcome {
        final_query,
        origin,
        termination,
        iterations: state.iterations,
        trace: state.steps,
        language: state.language,
        total_duration_ms: elapsed.as_millis() as u64,
        elapsed,
    })
}
