//! Corpus ingestion, embedded BM25 retrieval and remote retriever adapters.

mod chunk;
mod index;
mod query;
mod remote;
mod store;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::Retriever;
use crate::conversation::{ContextPassage, Conversation, PassageSource, Relevance, SchemaViolation};

pub use chunk::{chunk_document, Chunking};
pub use index::{Bm25Params, CorpusDocument, CorpusIndex, IngestError, Passage, Posting};
pub use query::{formulate_query, QueryError};
pub use remote::RemoteRetriever;
pub use store::{read_corpus_jsonl, CorpusStore, CorpusSummary, StandardRetriever};

pub const DEFAULT_K1: f64 = 1.2;
pub const DEFAULT_B: f64 = 0.75;
pub const DEFAULT_TOP_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrieverEngine {
    EmbeddedBm25,
    RemoteHttp,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryStrategy {
    #[default]
    LastUserTurn,
    ConcatUserTurns,
    FullHistory,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrieverConfig {
    pub engine: RetrieverEngine,
    pub corpus_id: String,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default)]
    pub query_strategy: QueryStrategy,
    #[serde(default = "default_k1")]
    pub bm25_k1: f64,
    #[serde(default = "default_b")]
    pub bm25_b: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remote: Option<RemoteRetrieverConfig>,
    /// Opaque system-specific settings, carried but not interpreted.
    #[serde(default)]
    pub settings: BTreeMap<String, String>,
}

fn default_top_k() -> usize {
    DEFAULT_TOP_K
}
fn default_k1() -> f64 {
    DEFAULT_K1
}
fn default_b() -> f64 {
    DEFAULT_B
}

impl RetrieverConfig {
    pub fn embedded(corpus_id: impl Into<String>) -> Self {
        Self {
            engine: RetrieverEngine::EmbeddedBm25,
            corpus_id: corpus_id.into(),
            top_k: DEFAULT_TOP_K,
            query_strategy: QueryStrategy::default(),
            bm25_k1: DEFAULT_K1,
            bm25_b: DEFAULT_B,
            remote: None,
            settings: BTreeMap::new(),
        }
    }

    pub fn bm25(&self) -> Bm25Params {
        Bm25Params {
            k1: self.bm25_k1,
            b: self.bm25_b,
        }
    }

    pub fn check(&self) -> Result<(), SchemaViolation> {
        if self.top_k < 1 {
            return Err(SchemaViolation::new("top_k", "top_k must be at least 1"));
        }
        if !(self.bm25_k1.is_finite() && self.bm25_k1 >= 0.0) {
            return Err(SchemaViolation::new("bm25_k1", "bm25_k1 must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.bm25_b) {
            return Err(SchemaViolation::new("bm25_b", "bm25_b must lie in [0, 1]"));
        }
        if self.engine == RetrieverEngine::RemoteHttp && self.remote.is_none() {
            return Err(SchemaViolation::new(
                "remote",
                "remote_http engine requires a remote section",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteRetrieverConfig {
    pub endpoint: String,
    /// Name of the environment variable holding a bearer token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_token_env: Option<String>,
    #[serde(default)]
    pub field_mapping: FieldMapping,
}

/// Where to find hit fields in a remote response. `results` is a dotted path
/// to the hit array; the rest are dotted paths inside each hit object.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldMapping {
    pub results: String,
    pub document_id: String,
    pub passage_id: String,
    pub title: String,
    pub text: String,
    pub score: String,
}

impl Default for FieldMapping {
    fn default() -> Self {
        Self {
            results: "results".into(),
            document_id: "document_id".into(),
            passage_id: "passage_id".into(),
            title: "title".into(),
            text: "text".into(),
            score: "score".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub document_id: String,
    pub passage_id: String,
    pub title: String,
    pub text: String,
    pub score: f64,
}

impl SearchHit {
    pub fn into_context(self, source: PassageSource, relevance: Relevance) -> ContextPassage {
        ContextPassage {
            document_id: self.document_id,
            passage_id: self.passage_id,
            title: self.title,
            text: self.text,
            score: self.score,
            relevance,
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RetrievalError {
    #[error("unknown corpus {0:?}")]
    UnknownCorpus(String),
    #[error("retriever unavailable{}: {detail}", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    RetrieverUnavailable { status: Option<u16>, detail: String },
    #[error("malformed retriever response: {0}")]
    MalformedResponse(String),
    #[error("invalid retriever config at {0}")]
    InvalidConfig(SchemaViolation),
    #[error(transparent)]
    Query(#[from] QueryError),
}

/// Runs the configured retriever for the conversation's pending question.
/// Hits come back as unmarked, retrieved contexts in rank order.
pub fn retrieve(
    retriever: &dyn Retriever,
    config: &RetrieverConfig,
    conv: &Conversation,
    manual_text: Option<&str>,
) -> Result<Vec<ContextPassage>, RetrievalError> {
    config.check().map_err(RetrievalError::InvalidConfig)?;
    let query = formulate_query(conv, config.query_strategy, manual_text)?;
    let hits = retriever.search(config, &query, config.top_k)?;
    Ok(hits
        .into_iter()
        .map(|h| h.into_context(PassageSource::Retrieved, Relevance::Unmarked))
        .collect())
}

/// The side-search panel: an ad hoc query against the same retriever. Hits are
/// returned raw; accepting one into a turn tags it as searched
/// (see [`crate::create::add_searched_passage`]).
pub fn side_search(
    retriever: &dyn Retriever,
    config: &RetrieverConfig,
    query: &str,
    top_k: usize,
) -> Result<Vec<SearchHit>, RetrievalError> {
    config.check().map_err(RetrievalError::InvalidConfig)?;
    if top_k < 1 {
        return Err(RetrievalError::InvalidConfig(SchemaViolation::new(
            "top_k",
            "top_k must be at least 1",
        )));
    }
    retriever.search(config, query, top_k)
}
