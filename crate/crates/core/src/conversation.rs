//! The conversation document: participants, retriever and generator settings,
//! the message list, and review status.
//!
//! Documents are exchanged as UTF-8 JSON with lower_snake_case keys. Parsing is
//! two-staged: a structural pass through serde (closed vocabularies, missing
//! sections) that reports the JSON path of the offending element, followed by a
//! semantic pass ([`Conversation::check`]) for cross-field invariants such as
//! speaker alternation.

use std::collections::BTreeSet;
use std::fmt;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generation::GeneratorConfig;
use crate::retrieval::RetrieverConfig;

pub use crate::quality::{validate_conversation, IssueKind, QualityIssue, ValidationReport};

/// A hard schema error together with the JSON path where it was found.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaViolation {
    pub path: String,
    pub message: String,
}

impl SchemaViolation {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Re-roots the path under `prefix` (e.g. `conversation` or `[2]`).
    pub fn under(mut self, prefix: &str) -> Self {
        self.path = join_path(prefix, &self.path);
        self
    }
}

impl fmt::Display for SchemaViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

pub(crate) fn join_path(prefix: &str, path: &str) -> String {
    if prefix.is_empty() {
        return path.to_string();
    }
    if path.is_empty() || path == "." {
        return prefix.to_string();
    }
    if path.starts_with('[') {
        format!("{prefix}{path}")
    } else {
        format!("{prefix}.{path}")
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DocumentError {
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("schema violation at {0}")]
    Schema(SchemaViolation),
}

impl DocumentError {
    pub fn violation(&self) -> Option<&SchemaViolation> {
        match self {
            DocumentError::Schema(v) => Some(v),
            DocumentError::Malformed(_) => None,
        }
    }
}

impl From<SchemaViolation> for DocumentError {
    fn from(v: SchemaViolation) -> Self {
        DocumentError::Schema(v)
    }
}

/// Parses raw bytes into a JSON value. Anything that is not UTF-8 JSON is
/// reported as [`DocumentError::Malformed`].
pub fn parse_json(bytes: &[u8]) -> Result<serde_json::Value, DocumentError> {
    let text = std::str::from_utf8(bytes).map_err(|e| DocumentError::Malformed(format!("input is not UTF-8: {e}")))?;
    serde_json::from_str(text).map_err(|e| DocumentError::Malformed(e.to_string()))
}

/// Deserializes a JSON value, reporting data errors with their path.
pub fn from_value_with_path<T: DeserializeOwned>(value: serde_json::Value) -> Result<T, SchemaViolation> {
    serde_path_to_error::deserialize(value).map_err(|err| {
        let path = err.path().to_string();
        SchemaViolation::new(path, err.into_inner().to_string())
    })
}

// ---------------------------------------------------------------------------
// Timestamps

/// An ISO-8601 (RFC 3339 profile) timestamp. The original spelling is kept so
/// documents round-trip byte for byte.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Timestamp(String);

impl Timestamp {
    pub fn parse(s: &str) -> Result<Self, String> {
        chrono::DateTime::parse_from_rfc3339(s)
            .map(|_| Timestamp(s.to_string()))
            .map_err(|e| format!("invalid ISO-8601 timestamp {s:?}: {e}"))
    }

    pub fn now() -> Self {
        Timestamp(chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Timestamp {
    type Error = String;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Timestamp::parse(&value)
    }
}

impl From<Timestamp> for String {
    fn from(t: Timestamp) -> Self {
        t.0
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

// ---------------------------------------------------------------------------
// Document types

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Conversation {
    pub participants: Participants,
    pub retriever: RetrieverConfig,
    pub generator: GeneratorConfig,
    pub messages: Vec<Message>,
    pub status: ConversationStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Participants {
    pub author: String,
    #[serde(default)]
    pub editors: Vec<String>,
    #[serde(default)]
    pub reviewers: Vec<String>,
    #[serde(default)]
    pub accessed_at: Vec<Timestamp>,
}

impl Participants {
    pub fn new(author: impl Into<String>) -> Self {
        Self {
            author: author.into(),
            editors: Vec::new(),
            reviewers: Vec::new(),
            accessed_at: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    User,
    Agent,
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Speaker::User => "user",
            Speaker::Agent => "agent",
        })
    }
}

/// One turn. The `speaker` key selects the variant; user turns carry
/// enrichments and agent turns carry contexts, so neither can hold the other's
/// fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "speaker", rename_all = "snake_case")]
pub enum Message {
    User(UserMessage),
    Agent(AgentMessage),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserMessage {
    pub text: String,
    #[serde(default)]
    pub enrichments: EnrichmentSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentMessage {
    pub text: String,
    pub contexts: Vec<ContextPassage>,
    /// The generation as it was before the first human edit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub original_text: Option<String>,
}

impl Message {
    pub fn user(text: impl Into<String>) -> Self {
        Message::User(UserMessage {
            text: text.into(),
            enrichments: EnrichmentSet::default(),
        })
    }

    pub fn agent(text: impl Into<String>, contexts: Vec<ContextPassage>) -> Self {
        Message::Agent(AgentMessage {
            text: text.into(),
            contexts,
            original_text: None,
        })
    }

    pub fn speaker(&self) -> Speaker {
        match self {
            Message::User(_) => Speaker::User,
            Message::Agent(_) => Speaker::Agent,
        }
    }

    pub fn text(&self) -> &str {
        match self {
            Message::User(m) => &m.text,
            Message::Agent(m) => &m.text,
        }
    }

    pub fn as_user(&self) -> Option<&UserMessage> {
        match self {
            Message::User(m) => Some(m),
            Message::Agent(_) => None,
        }
    }

    pub fn as_agent(&self) -> Option<&AgentMessage> {
        match self {
            Message::Agent(m) => Some(m),
            Message::User(_) => None,
        }
    }

    pub fn as_agent_mut(&mut self) -> Option<&mut AgentMessage> {
        match self {
            Message::Agent(m) => Some(m),
            Message::User(_) => None,
        }
    }

    pub fn as_user_mut(&mut self) -> Option<&mut UserMessage> {
        match self {
            Message::User(m) => Some(m),
            Message::Agent(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionType {
    Factoid,
    Opinion,
    Comparison,
    Keyword,
    Composite,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answerability {
    Answerable,
    Unanswerable,
    Partial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiTurn {
    Clarification,
    FollowUp,
    TopicSwitch,
    None,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnrichmentSet {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_type: Option<QuestionType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answerability: Option<Answerability>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multi_turn: Option<MultiTurn>,
}

impl EnrichmentSet {
    pub fn is_empty(&self) -> bool {
        self.question_type.is_none() && self.answerability.is_none() && self.multi_turn.is_none()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relevance {
    #[default]
    Unmarked,
    Relevant,
    Irrelevant,
}

impl Relevance {
    pub fn as_str(self) -> &'static str {
        match self {
            Relevance::Unmarked => "unmarked",
            Relevance::Relevant => "relevant",
            Relevance::Irrelevant => "irrelevant",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassageSource {
    #[default]
    Retrieved,
    Searched,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextPassage {
    pub document_id: String,
    pub passage_id: String,
    #[serde(default)]
    pub title: String,
    pub text: String,
    #[serde(default)]
    pub score: f64,
    #[serde(default)]
    pub relevance: Relevance,
    #[serde(default)]
    pub source: PassageSource,
}

impl ContextPassage {
    pub fn key(&self) -> PassageKey {
        PassageKey {
            document_id: self.document_id.clone(),
            passage_id: self.passage_id.clone(),
        }
    }
}

/// Identity of a passage within a corpus.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PassageKey {
    pub document_id: String,
    pub passage_id: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConversationState {
    #[default]
    Draft,
    Accepted,
    AcceptedWithEdits,
    Rejected,
}

impl ConversationState {
    pub fn as_str(self) -> &'static str {
        match self {
            ConversationState::Draft => "draft",
            ConversationState::Accepted => "accepted",
            ConversationState::AcceptedWithEdits => "accepted_with_edits",
            ConversationState::Rejected => "rejected",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConversationStatus {
    pub state: ConversationState,
    #[serde(default)]
    pub revisions: Vec<Revision>,
    #[serde(default)]
    pub comments: Vec<Comment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Revision {
    pub editor: String,
    pub timestamp: Timestamp,
    pub target: RevisionTarget,
    pub before: String,
    pub after: String,
}

/// The edited element: a message index plus a field path inside that message,
/// e.g. `text`, `enrichments` or `contexts[2].relevance`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RevisionTarget {
    pub message: usize,
    pub field: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Comment {
    pub author: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<CommentAnchor>,
}

/// Half-open character span `[start, end)` inside one message's text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommentAnchor {
    pub message: usize,
    pub start: usize,
    pub end: usize,
}

// ---------------------------------------------------------------------------
// Validation

impl Conversation {
    /// Builds a fresh draft with no messages.
    pub fn new(participants: Participants, retriever: RetrieverConfig, generator: GeneratorConfig) -> Self {
        Self {
            participants,
            retriever,
            generator,
            messages: Vec::new(),
            status: ConversationStatus::default(),
        }
    }

    /// Structural and semantic parse of an already-decoded JSON value.
    pub fn from_value(value: serde_json::Value) -> Result<Self, SchemaViolation> {
        let conv: Conversation = match from_value_with_path(value.clone()) {
            Ok(conv) => conv,
            Err(v) => return Err(refine_message_path(&value, v)),
        };
        conv.check()?;
        Ok(conv)
    }

    /// Checks every hard invariant the serde pass cannot express.
    pub fn check(&self) -> Result<(), SchemaViolation> {
        if self.participants.author.trim().is_empty() {
            return Err(SchemaViolation::new("participants.author", "author must not be empty"));
        }
        self.retriever.check().map_err(|v| v.under("retriever"))?;
        self.generator.check().map_err(|v| v.under("generator"))?;

        for (i, msg) in self.messages.iter().enumerate() {
            let expected = if i % 2 == 0 { Speaker::User } else { Speaker::Agent };
            if msg.speaker() != expected {
                return Err(SchemaViolation::new(
                    format!("messages[{i}]"),
                    format!(
                        "expected a {expected} message (speakers alternate starting with user), found {}",
                        msg.speaker()
                    ),
                ));
            }
            if let Message::Agent(agent) = msg {
                check_agent(agent).map_err(|v| v.under(&format!("messages[{i}]")))?;
            }
        }

        for (i, rev) in self.status.revisions.iter().enumerate() {
            let path = format!("status.revisions[{i}]");
            if rev.target.message >= self.messages.len() {
                return Err(SchemaViolation::new(
                    format!("{path}.target.message"),
                    format!("message index {} out of range", rev.target.message),
                ));
            }
            if rev.before == rev.after {
                return Err(SchemaViolation::new(path, "revision before and after are identical"));
            }
        }

        for (i, comment) in self.status.comments.iter().enumerate() {
            let path = format!("status.comments[{i}]");
            if comment.text.trim().is_empty() {
                return Err(SchemaViolation::new(
                    format!("{path}.text"),
                    "comment text must not be empty",
                ));
            }
            if let Some(anchor) = &comment.anchor {
                self.check_anchor(anchor)
                    .map_err(|m| SchemaViolation::new(format!("{path}.anchor"), m))?;
            }
        }
        Ok(())
    }

    pub(crate) fn check_anchor(&self, anchor: &CommentAnchor) -> Result<(), String> {
        let msg = self
            .messages
            .get(anchor.message)
            .ok_or_else(|| format!("message index {} out of range", anchor.message))?;
        let len = msg.text().chars().count();
        if anchor.start >= anchor.end || anchor.end > len {
            return Err(format!(
                "span [{}, {}) does not lie within message {} ({len} characters)",
                anchor.start, anchor.end, anchor.message
            ));
        }
        Ok(())
    }

    /// A completed conversation answers every user turn.
    pub fn is_complete(&self) -> bool {
        !self.messages.is_empty() && self.messages.len().is_multiple_of(2)
    }

    pub fn ends_with_user(&self) -> bool {
        matches!(self.messages.last(), Some(Message::User(_)))
    }

    pub fn user_turns(&self) -> impl Iterator<Item = (usize, &UserMessage)> {
        self.messages
            .iter()
            .enumerate()
            .filter_map(|(i, m)| m.as_user().map(|u| (i, u)))
    }

    pub fn agent_turns(&self) -> impl Iterator<Item = (usize, &AgentMessage)> {
        self.messages
            .iter()
            .enumerate()
            .filter_map(|(i, m)| m.as_agent().map(|a| (i, a)))
    }
}

/// Internally tagged messages are buffered by serde, so errors inside one stop
/// at `messages[i]`. Re-running that message as its concrete type recovers the
/// full path.
fn refine_message_path(value: &serde_json::Value, violation: SchemaViolation) -> SchemaViolation {
    let Some(i) = violation
        .path
        .strip_prefix("messages[")
        .and_then(|rest| rest.strip_suffix(']'))
        .and_then(|n| n.parse::<usize>().ok())
    else {
        return violation;
    };
    let Some(mut msg) = value["messages"].get(i).and_then(|m| m.as_object()).cloned() else {
        return violation;
    };
    let speaker = msg.remove("speaker");
    let inner = match speaker.as_ref().and_then(|s| s.as_str()) {
        Some("user") => from_value_with_path::<UserMessage>(msg.into()).err(),
        Some("agent") => from_value_with_path::<AgentMessage>(msg.into()).err(),
        _ => None,
    };
    match inner {
        Some(v) => v.under(&violation.path),
        None => violation,
    }
}

fn check_agent(agent: &AgentMessage) -> Result<(), SchemaViolation> {
    if agent.original_text.as_deref() == Some(agent.text.as_str()) {
        return Err(SchemaViolation::new(
            "original_text",
            "original_text must differ from text",
        ));
    }
    let mut seen = BTreeSet::new();
    for (j, ctx) in agent.contexts.iter().enumerate() {
        if !(ctx.score.is_finite() && ctx.score >= 0.0) {
            return Err(SchemaViolation::new(
                format!("contexts[{j}].score"),
                format!("score must be a non-negative number, got {}", ctx.score),
            ));
        }
        if !seen.insert((ctx.document_id.as_str(), ctx.passage_id.as_str())) {
            return Err(SchemaViolation::new(
                format!("contexts[{j}]"),
                format!("duplicate context ({}, {})", ctx.document_id, ctx.passage_id),
            ));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Wire format

/// Parses and validates one conversation document.
pub fn parse_conversation(document: &[u8]) -> Result<Conversation, DocumentError> {
    let value = parse_json(document)?;
    Ok(Conversation::from_value(value)?)
}

/// Deterministic pretty-printed JSON. Key order follows the declaration order
/// of the document types and maps are ordered, so equal values always produce
/// equal bytes.
pub fn serialize_conversation(conv: &Conversation) -> Vec<u8> {
    to_json_bytes(conv)
}

/// A batch is a JSON array of conversation documents. Violations carry the
/// item index as a path prefix (`[2].messages[0]`).
pub fn parse_batch(document: &[u8]) -> Result<Vec<Conversation>, DocumentError> {
    let value = parse_json(document)?;
    let items = match value {
        serde_json::Value::Array(items) => items,
        _ => return Err(SchemaViolation::new(".", "expected a JSON array of conversations").into()),
    };
    items
        .into_iter()
        .enumerate()
        .map(|(i, item)| Conversation::from_value(item).map_err(|v| v.under(&format!("[{i}]")).into()))
        .collect()
}

pub fn serialize_batch(convs: &[Conversation]) -> Vec<u8> {
    to_json_bytes(&convs)
}

pub(crate) fn to_json_bytes<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("document types always serialize");
    out.push(b'\n');
    out
}
