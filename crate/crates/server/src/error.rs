use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

use turnsmith_core::conversation::DocumentError;
use turnsmith_core::create::{EditError, RegenerateError};
use turnsmith_core::experiment::ExperimentError;
use turnsmith_core::generation::{AgentTurnError, GenerationError, TemplateError};
use turnsmith_core::retrieval::{IngestError, QueryError, RetrievalError};
use turnsmith_core::review::ReviewError;
use turnsmith_core::SchemaViolation;

/// The structured error body every endpoint returns on failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    pub path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                code: code.into(),
                message: message.into(),
                path: None,
            },
        }
    }

    pub fn with_path(mut self, path: impl Into<String>) -> Self {
        self.body.path = Some(path.into());
        self
    }

    pub fn unprocessable(code: &str, message: impl ToString) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, message.to_string())
    }

    pub fn not_found(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<SchemaViolation> for ApiError {
    fn from(v: SchemaViolation) -> Self {
        ApiError::unprocessable("schema_violation", &v.message).with_path(v.path)
    }
}

impl From<DocumentError> for ApiError {
    fn from(e: DocumentError) -> Self {
        match e {
            DocumentError::Malformed(m) => ApiError::new(StatusCode::BAD_REQUEST, "malformed_json", m),
            DocumentError::Schema(v) => v.into(),
        }
    }
}

impl From<EditError> for ApiError {
    fn from(e: EditError) -> Self {
        let code = match e {
            EditError::IndexOutOfRange { .. } => "index_out_of_range",
            EditError::NotAgentTurn(_) => "not_agent_turn",
            EditError::NotUserTurn(_) => "not_user_turn",
            EditError::DuplicateContext { .. } => "duplicate_context",
            EditError::EmptyResponse => "empty_response",
            EditError::EmptyQuestion => "empty_question",
            EditError::IdenticalText => "identical_text",
            EditError::AwaitingResponse => "awaiting_response",
            EditError::NoPendingQuestion => "no_pending_question",
        };
        ApiError::unprocessable(code, e)
    }
}

impl From<RetrievalError> for ApiError {
    fn from(e: RetrievalError) -> Self {
        match e {
            RetrievalError::UnknownCorpus(ref id) => {
                ApiError::not_found("unknown_corpus", format!("unknown corpus {id:?}"))
            }
            RetrievalError::RetrieverUnavailable { .. } => {
                ApiError::new(StatusCode::BAD_GATEWAY, "retriever_unavailable", e.to_string())
            }
            RetrievalError::MalformedResponse(_) => {
                ApiError::new(StatusCode::BAD_GATEWAY, "malformed_retriever_response", e.to_string())
            }
            RetrievalError::InvalidConfig(v) => v.into(),
            RetrievalError::Query(q) => {
                let code = match q {
                    QueryError::MissingManualText => "missing_manual_text",
                    QueryError::EmptyConversation => "empty_conversation",
                };
                ApiError::unprocessable(code, q)
            }
        }
    }
}

impl From<GenerationError> for ApiError {
    fn from(e: GenerationError) -> Self {
        match e {
            GenerationError::Unavailable { .. } => {
                ApiError::new(StatusCode::BAD_GATEWAY, "generator_unavailable", e.to_string())
            }
            GenerationError::Timeout(_) => {
                ApiError::new(StatusCode::GATEWAY_TIMEOUT, "generator_timeout", e.to_string())
            }
            GenerationError::MalformedResponse(_) => {
                ApiError::new(StatusCode::BAD_GATEWAY, "malformed_generator_response", e.to_string())
            }
            GenerationError::InvalidConfig(v) => v.into(),
            GenerationError::Template(t) => {
                let code = match t {
                    TemplateError::NoPendingQuestion => "no_pending_question",
                    _ => "template_error",
                };
                ApiError::unprocessable(code, t)
            }
        }
    }
}

impl From<AgentTurnError> for ApiError {
    fn from(e: AgentTurnError) -> Self {
        match e {
            AgentTurnError::Retrieval(r) => r.into(),
            AgentTurnError::Generation(g) => g.into(),
        }
    }
}

impl From<RegenerateError> for ApiError {
    fn from(e: RegenerateError) -> Self {
        match e {
            RegenerateError::Edit(e) => e.into(),
            RegenerateError::Generation(g) => g.into(),
        }
    }
}

impl From<IngestError> for ApiError {
    fn from(e: IngestError) -> Self {
        let (status, code) = match e {
            IngestError::DuplicateCorpus(_) => (StatusCode::CONFLICT, "duplicate_corpus"),
            IngestError::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "io_error"),
            IngestError::Parse { .. } => (StatusCode::BAD_REQUEST, "malformed_jsonl"),
            IngestError::EmptyCorpus(_) => (StatusCode::UNPROCESSABLE_ENTITY, "empty_corpus"),
            IngestError::DuplicateDocumentId(_) => (StatusCode::UNPROCESSABLE_ENTITY, "duplicate_document_id"),
            IngestError::EmptyDocument(_) => (StatusCode::UNPROCESSABLE_ENTITY, "empty_document"),
            IngestError::InvalidChunking { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_chunking"),
            IngestError::InvalidCorpusId(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_corpus_id"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<ReviewError> for ApiError {
    fn from(e: ReviewError) -> Self {
        let message = e.to_string();
        match e {
            ReviewError::Malformed(m) => ApiError::new(StatusCode::BAD_REQUEST, "malformed_json", m),
            ReviewError::Schema { item, violation } => ApiError::unprocessable("schema_violation", violation.message)
                .with_path(format!("[{item}]{}", bracket_join(&violation.path))),
            ReviewError::InvalidBatch(v) => ApiError::unprocessable("invalid_batch", v.message).with_path(v.path),
            ReviewError::ConstraintViolation(c) => ApiError::new(StatusCode::FORBIDDEN, c.as_str(), message),
            ReviewError::Edit(e) => e.into(),
            other => {
                let code = match other {
                    ReviewError::EmptyBatch => "empty_batch",
                    ReviewError::ItemOutOfRange { .. } => "item_out_of_range",
                    ReviewError::NotVisited(_) => "not_visited",
                    ReviewError::AlreadyDecided { .. } => "already_decided",
                    ReviewError::NoChange => "no_change",
                    ReviewError::AnchorOutOfRange(_) => "anchor_out_of_range",
                    ReviewError::EmptyComment => "empty_comment",
                    ReviewError::MissingEdits => "missing_edits",
                    ReviewError::MissingRejectComment => "missing_reject_comment",
                    ReviewError::UndecidedItems(_) => "undecided_items",
                    _ => "review_error",
                };
                ApiError::unprocessable(code, message)
            }
        }
    }
}

fn bracket_join(path: &str) -> String {
    if path.is_empty() || path.starts_with('[') {
        path.to_string()
    } else {
        format!(".{path}")
    }
}

impl From<ExperimentError> for ApiError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Malformed(m) => ApiError::new(StatusCode::BAD_REQUEST, "malformed_json", m),
            ExperimentError::InvalidSpec(v) => v.into(),
            ExperimentError::JudgeUnavailable(_) => {
                ApiError::new(StatusCode::BAD_GATEWAY, "judge_unavailable", e.to_string())
            }
            ExperimentError::EmptyDataset => ApiError::unprocessable("empty_dataset", e),
            ExperimentError::IncompleteConversation(i) => {
                ApiError::unprocessable("incomplete_conversation", &e).with_path(format!("conversations[{i}]"))
            }
            ExperimentError::EmptyReference(_) => ApiError::unprocessable("empty_reference", e),
            ExperimentError::TaskCapExceeded(_) => ApiError::unprocessable("task_cap_exceeded", e),
            ExperimentError::Cancelled => ApiError::new(StatusCode::CONFLICT, "cancelled", e.to_string()),
        }
    }
}
