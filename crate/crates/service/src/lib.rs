//! HTTP front end and command-line tools for the text-to-SPARQL agent.

pub mod config;
pub mod server;

pub use config::{load_config, AppConfig, ConfigError, DatasetConfig, EmbeddingConfig};
pub use server::{router, serve, AppState, ErrorBody, Text2SparqlResponse, PLACEHOLDER_QUERY, WARNING_HEADER};
