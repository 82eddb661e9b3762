use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{FromRequestParts, Path, Query, State};
use axum::http::request::Parts;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use uuid::Uuid;

use turnsmith_core::conversation::{
    from_value_with_path, parse_conversation, parse_json, Comment, CommentAnchor, ContextPassage, Conversation,
    DocumentError, EnrichmentSet, PassageSource, Relevance, ValidationReport,
};
use turnsmith_core::create::{self, Stamp, DEFAULT_MIN_NGRAM};
use turnsmith_core::experiment::{split_tasks, ExperimentSpec, RunOptions};
use turnsmith_core::generation::{agent_turn, render_prompt, GeneratorConfig};
use turnsmith_core::quality::validate_conversation;
use turnsmith_core::retrieval::{read_corpus_jsonl, retrieve, side_search, Chunking, RetrieverConfig, SearchHit};
use turnsmith_core::review::{load_batch, Decision, ReviewAction, ReviewBatch};

use crate::error::ApiError;
use crate::experiments::Fetch;
use crate::AppState;

type ApiResult<T = Response> = Result<T, ApiError>;

/// The caller's email, taken from `X-User-Email`. Required on every
/// mutating call and never stored.
pub struct Principal(pub String);

pub const PRINCIPAL_HEADER: &str = "x-user-email";

impl<S: Send + Sync> FromRequestParts<S> for Principal {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, _: &S) -> Result<Self, Self::Rejection> {
        let email = parts
            .headers
            .get(PRINCIPAL_HEADER)
            .and_then(|v| v.to_str().ok())
            .map(str::trim)
            .unwrap_or("");
        if email.is_empty() || !email.contains('@') {
            return Err(ApiError::new(
                StatusCode::UNAUTHORIZED,
                "missing_principal",
                "an X-User-Email header with an email address is required",
            ));
        }
        Ok(Principal(email.to_string()))
    }
}

fn parse<T: DeserializeOwned>(bytes: &[u8]) -> ApiResult<T> {
    let value = parse_json(bytes)?;
    Ok(from_value_with_path(value).map_err(DocumentError::Schema)?)
}

fn checked(conv: &Conversation, field: &str) -> ApiResult<()> {
    conv.check().map_err(|v| ApiError::from(v.under(field)))
}

fn batch_checked(batch: &ReviewBatch) -> ApiResult<()> {
    batch.check().map_err(|e| {
        let mut err = ApiError::from(e);
        err.body.path = Some(match err.body.path.take() {
            Some(p) if p.starts_with('[') => format!("batch.conversations{p}"),
            Some(p) => format!("batch.{p}"),
            None => "batch".into(),
        });
        err
    })
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

fn ok(value: impl Serialize) -> ApiResult {
    Ok(Json(value).into_response())
}

fn document_string(bytes: Vec<u8>) -> String {
    String::from_utf8(bytes).expect("serialized JSON is UTF-8")
}

// ---------------------------------------------------------------------------
// Health and corpora

pub async fn health() -> Json<Value> {
    Json(json!({"status": "ok"}))
}

pub async fn list_corpora(State(state): State<AppState>) -> Json<Value> {
    Json(json!({"corpora": state.store.list()}))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestParams {
    id: String,
    max_tokens: Option<usize>,
    overlap: Option<usize>,
}

pub async fn ingest_corpus(
    State(state): State<AppState>,
    _who: Principal,
    params: Result<Query<IngestParams>, QueryRejection>,
    body: Bytes,
) -> ApiResult {
    let Query(params) = params.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_query", e.body_text()))?;
    let defaults = Chunking::default();
    let chunking = Chunking {
        max_tokens: params.max_tokens.unwrap_or(defaults.max_tokens),
        overlap: params.overlap.unwrap_or(defaults.overlap),
    };
    let store = state.store.clone();
    let summary = blocking(move || {
        let docs = read_corpus_jsonl(&body[..])?;
        store.ingest(&params.id, docs, chunking)?;
        Ok(store
            .list()
            .into_iter()
            .find(|s| s.corpus_id == params.id)
            .expect("just ingested"))
    })
    .await?;
    Ok((StatusCode::CREATED, Json(summary)).into_response())
}

// ---------------------------------------------------------------------------
// Retrieval and generation

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RetrieveRequest {
    retriever: RetrieverConfig,
    #[serde(default)]
    query: Option<String>,
    #[serde(default)]
    conversation: Option<Conversation>,
}

pub async fn retrieve_passages(State(state): State<AppState>, _who: Principal, body: Bytes) -> ApiResult {
    let req: RetrieveRequest = parse(&body)?;
    let passages = blocking(move || {
        let retriever = state.backends.retriever.as_ref();
        match &req.conversation {
            Some(conv) => {
                checked(conv, "conversation")?;
                Ok(retrieve(retriever, &req.retriever, conv, req.query.as_deref())?)
            }
            None => {
                let query = req.query.as_deref().ok_or_else(|| {
                    ApiError::unprocessable("missing_query", "either query or conversation is required")
                })?;
                Ok(side_search(retriever, &req.retriever, query, req.retriever.top_k)?
                    .into_iter()
                    .map(|h| h.into_context(PassageSource::Retrieved, Relevance::Unmarked))
                    .collect::<Vec<_>>())
            }
        }
    })
    .await?;
    ok(json!({ "passages": passages }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SearchRequest {
    retriever: RetrieverConfig,
    query: String,
    #[serde(default)]
    top_k: Option<usize>,
}

pub async fn search(State(state): State<AppState>, _who: Principal, body: Bytes) -> ApiResult {
    let req: SearchRequest = parse(&body)?;
    let hits = blocking(move || {
        let top_k = req.top_k.unwrap_or(req.retriever.top_k);
        Ok(side_search(
            state.backends.retriever.as_ref(),
            &req.retriever,
            &req.query,
            top_k,
        )?)
    })
    .await?;
    ok(json!({ "hits": hits }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenerateRequest {
    generator: GeneratorConfig,
    #[serde(default)]
    prompt: Option<String>,
    #[serde(default)]
    conversation: Option<Conversation>,
    #[serde(default)]
    passages: Vec<ContextPassage>,
}

pub async fn generate(State(state): State<AppState>, _who: Principal, body: Bytes) -> ApiResult {
    let req: GenerateRequest = parse(&body)?;
    let (result, prompt) = blocking(move || {
        let prompt = match (&req.prompt, &req.conversation) {
            (Some(p), _) => p.clone(),
            (None, Some(conv)) => {
                checked(conv, "conversation")?;
                req.generator
                    .check()
                    .map_err(|v| ApiError::from(v.under("generator")))?;
                render_prompt(&req.generator, conv, &req.passages)
                    .map_err(turnsmith_core::generation::GenerationError::from)?
            }
            (None, None) => {
                return Err(ApiError::unprocessable(
                    "missing_prompt",
                    "either prompt or conversation is required",
                ))
            }
        };
        let result = state.backends.generator.generate(&req.generator, &prompt)?;
        Ok((result, prompt))
    })
    .await?;
    ok(json!({ "result": result, "prompt": prompt }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChatTurnRequest {
    conversation: Conversation,
    #[serde(default)]
    query: Option<String>,
}

/// One live agent turn using the conversation's own retriever and generator
/// settings. The answered conversation is returned; nothing is kept.
pub async fn chat_turn(State(state): State<AppState>, _who: Principal, body: Bytes) -> ApiResult {
    let req: ChatTurnRequest = parse(&body)?;
    checked(&req.conversation, "conversation")?;
    let (turn, conversation) = blocking(move || {
        let conv = req.conversation;
        let turn = agent_turn(
            &state.backends,
            &conv.retriever,
            &conv.generator,
            &conv,
            req.query.as_deref(),
        )?;
        let next = create::append_agent_turn(&conv, &turn)?;
        Ok((turn, next))
    })
    .await?;
    ok(json!({
        "response": turn.response,
        "contexts": turn.contexts,
        "prompt": turn.prompt,
        "conversation": conversation,
    }))
}

// ---------------------------------------------------------------------------
// Conversation documents

pub async fn validate(_who: Principal, body: Bytes) -> ApiResult {
    let report = match parse_conversation(&body) {
        Ok(conv) => validate_conversation(&conv),
        Err(DocumentError::Schema(v)) => ValidationReport {
            errors: vec![v],
            issues: Vec::new(),
        },
        Err(e) => return Err(e.into()),
    };
    ok(json!({
        "valid": report.errors.is_empty(),
        "errors": report.errors,
        "issues": report.issues,
    }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExportRequest {
    conversation: Conversation,
    #[serde(default)]
    acknowledgements: Vec<bool>,
}

pub async fn export_conversation(_who: Principal, body: Bytes) -> ApiResult {
    let req: ExportRequest = parse(&body)?;
    let export = create::export_with_checklist(&req.conversation, &req.acknowledgements)
        .map_err(|v| ApiError::from(v.under("conversation")))?;
    ok(json!({
        "document": document_string(export.document),
        "checklist": export.checklist,
    }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuestionRequest {
    conversation: Conversation,
    text: String,
}

pub async fn create_question(_who: Principal, body: Bytes) -> ApiResult {
    let req: QuestionRequest = parse(&body)?;
    checked(&req.conversation, "conversation")?;
    ok(json!({ "conversation": create::append_question(&req.conversation, &req.text)? }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RelevanceRequest {
    conversation: Conversation,
    message: usize,
    context: usize,
    relevance: Relevance,
}

pub async fn create_relevance(_who: Principal, body: Bytes) -> ApiResult {
    let req: RelevanceRequest = parse(&body)?;
    checked(&req.conversation, "conversation")?;
    let conv = create::edit_passage_relevance(&req.conversation, req.message, req.context, req.relevance)?;
    ok(json!({ "conversation": conv }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PassageRequest {
    conversation: Conversation,
    message: usize,
    hit: SearchHit,
}

pub async fn create_passage(_who: Principal, body: Bytes) -> ApiResult {
    let req: PassageRequest = parse(&body)?;
    checked(&req.conversation, "conversation")?;
    let conv = create::add_searched_passage(&req.conversation, req.message, &req.hit)?;
    ok(json!({ "conversation": conv }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResponseEditRequest {
    conversation: Conversation,
    message: usize,
    text: String,
}

pub async fn create_response(Principal(who): Principal, body: Bytes) -> ApiResult {
    let req: ResponseEditRequest = parse(&body)?;
    checked(&req.conversation, "conversation")?;
    let mut conv = create::edit_response(&req.conversation, req.message, &req.text, &Stamp::now(who.clone()))?;
    let p = &mut conv.participants;
    if p.author != who && !p.editors.contains(&who) {
        p.editors.push(who);
    }
    ok(json!({ "conversation": conv }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnrichmentRequest {
    conversation: Conversation,
    message: usize,
    enrichments: EnrichmentSet,
}

pub async fn create_enrichments(_who: Principal, body: Bytes) -> ApiResult {
    let req: EnrichmentRequest = parse(&body)?;
    checked(&req.conversation, "conversation")?;
    let conv = create::set_enrichments(&req.conversation, req.message, req.enrichments)?;
    ok(json!({ "conversation": conv }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MessageRequest {
    conversation: Conversation,
    message: usize,
    #[serde(default)]
    min_ngram: Option<usize>,
}

pub async fn create_regenerate(State(state): State<AppState>, _who: Principal, body: Bytes) -> ApiResult {
    let req: MessageRequest = parse(&body)?;
    checked(&req.conversation, "conversation")?;
    let regen = blocking(move || {
        let conv = &req.conversation;
        Ok(create::regenerate_response(
            state.backends.generator.as_ref(),
            &conv.generator,
            conv,
            req.message,
        )?)
    })
    .await?;
    ok(json!({
        "conversation": regen.conversation,
        "response": regen.response,
        "prompt": regen.prompt,
    }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiffRequest {
    original: String,
    edited: String,
}

pub async fn diff(_who: Principal, body: Bytes) -> ApiResult {
    let req: DiffRequest = parse(&body)?;
    ok(json!({ "segments": create::word_diff(&req.original, &req.edited) }))
}

pub async fn overlap(_who: Principal, body: Bytes) -> ApiResult {
    let req: MessageRequest = parse(&body)?;
    checked(&req.conversation, "conversation")?;
    let spans = create::highlight_turn(
        &req.conversation,
        req.message,
        req.min_ngram.unwrap_or(DEFAULT_MIN_NGRAM),
    )?;
    ok(json!({ "spans": spans }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HintsRequest {
    conversation: Conversation,
}

pub async fn hints(_who: Principal, body: Bytes) -> ApiResult {
    let req: HintsRequest = parse(&body)?;
    checked(&req.conversation, "conversation")?;
    ok(json!({ "hints": create::compute_hints(&req.conversation) }))
}

// ---------------------------------------------------------------------------
// Review

pub async fn review_validate(_who: Principal, body: Bytes) -> ApiResult {
    ok(json!({ "batch": load_batch(&body)? }))
}

macro_rules! review_request {
    ($name:ident { $($field:ident : $ty:ty),* $(,)? }) => {
        #[derive(Debug, Deserialize)]
        #[serde(deny_unknown_fields)]
        struct $name {
            batch: ReviewBatch,
            #[serde(default)]
            item: usize,
            $($field: $ty,)*
        }
    };
}

review_request!(GotoRequest {});
review_request!(EditRequest { action: ReviewAction });
review_request!(CommentRequest { text: String, anchor: Option<CommentAnchor> });
review_request!(DecideRequest { decision: Decision });

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BatchRequest {
    batch: ReviewBatch,
}

fn review_request<T: DeserializeOwned>(body: &[u8], batch: impl Fn(&T) -> &ReviewBatch) -> ApiResult<T> {
    let req: T = parse(body)?;
    batch_checked(batch(&req))?;
    Ok(req)
}

pub async fn review_goto(_who: Principal, body: Bytes) -> ApiResult {
    let req: GotoRequest = review_request(&body, |r: &GotoRequest| &r.batch)?;
    ok(json!({ "batch": req.batch.goto(req.item)? }))
}

pub async fn review_edit(Principal(who): Principal, body: Bytes) -> ApiResult {
    let req: EditRequest = review_request(&body, |r: &EditRequest| &r.batch)?;
    ok(json!({ "batch": req.batch.review_edit(req.item, &req.action, &Stamp::now(who))? }))
}

pub async fn review_comment(Principal(who): Principal, body: Bytes) -> ApiResult {
    let req: CommentRequest = review_request(&body, |r: &CommentRequest| &r.batch)?;
    let comment = Comment {
        author: who,
        text: req.text,
        anchor: req.anchor,
    };
    ok(json!({ "batch": req.batch.add_comment(req.item, comment)? }))
}

pub async fn review_decide(Principal(who): Principal, body: Bytes) -> ApiResult {
    let req: DecideRequest = review_request(&body, |r: &DecideRequest| &r.batch)?;
    ok(json!({ "batch": req.batch.decide(req.item, req.decision, &Stamp::now(who))? }))
}

pub async fn review_export(_who: Principal, body: Bytes) -> ApiResult {
    let req: BatchRequest = review_request(&body, |r: &BatchRequest| &r.batch)?;
    ok(json!({ "document": document_string(req.batch.export()?) }))
}

// ---------------------------------------------------------------------------
// Experiments

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaunchParams {
    workers: Option<usize>,
}

pub async fn launch_experiment(
    State(state): State<AppState>,
    _who: Principal,
    params: Result<Query<LaunchParams>, QueryRejection>,
    body: Bytes,
) -> ApiResult {
    let Query(params) = params.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_query", e.body_text()))?;
    let spec = ExperimentSpec::parse(&body)?;
    split_tasks(&spec.conversations, spec.split, spec.random_seed)?;
    let workers = params.workers.unwrap_or(state.workers).max(1);
    let id = state
        .experiments
        .launch(spec, state.backends.clone(), RunOptions { workers });
    Ok((StatusCode::ACCEPTED, Json(json!({ "experiment_id": id.to_string() }))).into_response())
}

fn experiment_id(raw: &str) -> ApiResult<Uuid> {
    Uuid::parse_str(raw).map_err(|_| unknown_experiment(raw))
}

fn unknown_experiment(raw: &str) -> ApiError {
    ApiError::not_found("unknown_experiment", format!("no experiment {raw:?}"))
}

pub async fn experiment_status(State(state): State<AppState>, Path(raw): Path<String>) -> ApiResult {
    let id = experiment_id(&raw)?;
    ok(state.experiments.status(id).ok_or_else(|| unknown_experiment(&raw))?)
}

pub async fn experiment_result(State(state): State<AppState>, Path(raw): Path<String>) -> ApiResult {
    let id = experiment_id(&raw)?;
    match state.experiments.result(id).ok_or_else(|| unknown_experiment(&raw))? {
        Fetch::Ready(bytes) => {
            Ok(([(header::CONTENT_TYPE, "application/json")], bytes.as_ref().clone()).into_response())
        }
        Fetch::Pending(p) => Err(ApiError::new(
            StatusCode::CONFLICT,
            "not_finished",
            format!("experiment still running ({}/{} done)", p.done, p.total),
        )),
        Fetch::Failed(e) => Err(e.into()),
    }
}

pub async fn delete_experiment(State(state): State<AppState>, _who: Principal, Path(raw): Path<String>) -> ApiResult {
    let id = experiment_id(&raw)?;
    if state.experiments.remove(id) {
        Ok(StatusCode::NO_CONTENT.into_response())
    } else {
        Err(unknown_experiment(&raw))
    }
}

pub async fn fallback() -> ApiError {
    ApiError::not_found("not_found", "no such route")
}
