//! Core of the text-to-SPARQL agent.
//!
//! * [`kg`]: SPARQL 1.1 protocol client and the fixed inspection queries.
//! * [`grounding`]: hybrid schema search (dense + BM25 fused with RRF) and
//!   full-text entity search.
//! * [`llm`]: prompt templates, chat backends and controller-output parsing.
//! * [`agent`]: the ReAct controller loop.
//! * [`tracelab`]: run logs and the analytics computed over them.

pub mod agent;
pub mod grounding;
pub mod kg;
pub mod llm;
pub mod text;
pub mod tracelab;

/// Hard ceiling on the time a single question may take end to end.
pub const MAX_TOTAL_BUDGET: std::time::Duration = std::time::Duration::from_secs(600);
