//! Pluggable retriever and generator seams.
//!
//! Everything that talks to a retriever or generator goes through these two
//! traits, so tests and the experiment runner can substitute instrumented
//! stubs.

use std::sync::Arc;

use crate::generation::{GenerationError, GenerationResult, GeneratorConfig, GeneratorEndpoint, StandardGenerator};
use crate::retrieval::{CorpusStore, RetrievalError, RetrieverConfig, SearchHit, StandardRetriever};

pub trait Retriever: Send + Sync {
    fn search(&self, config: &RetrieverConfig, query: &str, top_k: usize) -> Result<Vec<SearchHit>, RetrievalError>;
}

pub trait Generator: Send + Sync {
    fn generate(&self, config: &GeneratorConfig, prompt: &str) -> Result<GenerationResult, GenerationError>;
}

#[derive(Clone)]
pub struct Backends {
    pub retriever: Arc<dyn Retriever>,
    pub generator: Arc<dyn Generator>,
}

impl Backends {
    pub fn new(retriever: Arc<dyn Retriever>, generator: Arc<dyn Generator>) -> Self {
        Self { retriever, generator }
    }

    /// Embedded BM25 over `store` plus the HTTP adapters.
    pub fn standard(store: Arc<CorpusStore>, default_endpoint: Option<GeneratorEndpoint>) -> Self {
        Self {
            retriever: Arc::new(StandardRetriever::new(store)),
            generator: Arc::new(StandardGenerator::new(default_endpoint)),
        }
    }
}

impl std::fmt::Debug for Backends {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Backends").finish_non_exhaustive()
    }
}
