//! Stateless HTTP facade over the turnsmith engines.
//!
//! Conversations and review batches travel in every request body and come
//! back in the response; the server never writes them anywhere. The only
//! server-side state is the corpus indexes under `data_dir/corpora` and
//! in-flight experiments, which are held in memory and expire.

pub mod config;
pub mod error;
pub mod experiments;
pub mod routes;

use std::sync::Arc;
use std::time::Duration;

use axum::extract::DefaultBodyLimit;
use axum::routing::{get, post};
use axum::Router;
use thiserror::Error;
use tokio::net::TcpListener;

use turnsmith_core::retrieval::{CorpusStore, IngestError};
use turnsmith_core::Backends;

pub use config::{ConfigError, ServerConfig};
pub use error::{ApiError, ErrorBody};
pub use experiments::ExperimentRegistry;
pub use routes::PRINCIPAL_HEADER;

const BODY_LIMIT: usize = 64 * 1024 * 1024;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<CorpusStore>,
    pub backends: Backends,
    pub experiments: Arc<ExperimentRegistry>,
    pub workers: usize,
}

impl AppState {
    /// Opens the corpus directory and wires the standard adapters.
    pub fn from_config(config: &ServerConfig) -> Result<Self, ServeError> {
        let store = Arc::new(CorpusStore::open(&config.data_dir)?);
        let backends = Backends::standard(store.clone(), config.default_endpoint());
        Ok(Self::new(store, backends, config))
    }

    pub fn new(store: Arc<CorpusStore>, backends: Backends, config: &ServerConfig) -> Self {
        Self {
            store,
            backends,
            experiments: Arc::new(ExperimentRegistry::new(Duration::from_secs(config.experiment_ttl_secs))),
            workers: config.workers.max(1),
        }
    }
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot open corpus store: {0}")]
    Store(#[from] IngestError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub fn router(state: AppState) -> Router {
    use routes::*;
    Router::new()
        .route("/api/health", get(health))
        .route("/api/corpora", get(list_corpora).post(ingest_corpus))
        .route("/api/retrieve", post(retrieve_passages))
        .route("/api/search", post(search))
        .route("/api/generate", post(generate))
        .route("/api/chat/turn", post(chat_turn))
        .route("/api/conversations/validate", post(validate))
        .route("/api/conversations/export", post(export_conversation))
        .route("/api/create/question", post(create_question))
        .route("/api/create/relevance", post(create_relevance))
        .route("/api/create/passage", post(create_passage))
        .route("/api/create/response", post(create_response))
        .route("/api/create/enrichments", post(create_enrichments))
        .route("/api/create/regenerate", post(create_regenerate))
        .route("/api/diff", post(diff))
        .route("/api/overlap", post(overlap))
        .route("/api/hints", post(hints))
        .route("/api/review/batch/validate", post(review_validate))
        .route("/api/review/goto", post(review_goto))
        .route("/api/review/edit", post(review_edit))
        .route("/api/review/comment", post(review_comment))
        .route("/api/review/decide", post(review_decide))
        .route("/api/review/export", post(review_export))
        .route("/api/experiments", post(launch_experiment))
        .route(
            "/api/experiments/{id}",
            get(experiment_status).delete(delete_experiment),
        )
        .route("/api/experiments/{id}/result", get(experiment_result))
        .fallback(fallback)
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

pub async fn serve_on(listener: TcpListener, state: AppState) -> Result<(), ServeError> {
    axum::serve(listener, router(state)).await?;
    Ok(())
}

pub async fn serve(config: ServerConfig) -> Result<(), ServeError> {
    let state = AppState::from_config(&config)?;
    let listener = TcpListener::bind(&config.listen).await?;
    tracing::info!(address = %listener.local_addr()?, data_dir = %config.data_dir.display(), "listening");
    serve_on(listener, state).await
}
