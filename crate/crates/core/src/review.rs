//! Review mode: a reviewer walks a batch of finished conversations, makes
//! constrained repairs, leaves comments and decides each item.
//!
//! Reviewers may edit agent responses, passage relevance and enrichments.
//! They may not touch user questions, edit baselines, or run the retriever or
//! generator; those attempts fail with [`ReviewError::ConstraintViolation`]
//! and leave the batch unchanged.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conversation::{
    parse_json, serialize_batch, Comment, Conversation, ConversationState, DocumentError, EnrichmentSet, Relevance,
    Revision, RevisionTarget, SchemaViolation,
};
use crate::create::{self, EditError, Stamp};
use crate::retrieval::SearchHit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accept,
    AcceptWithEdits,
    Reject,
}

impl Decision {
    pub fn state(self) -> ConversationState {
        match self {
            Decision::Accept => ConversationState::Accepted,
            Decision::AcceptWithEdits => ConversationState::AcceptedWithEdits,
            Decision::Reject => ConversationState::Rejected,
        }
    }
}

/// Why a review action is refused outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    EditQuestion,
    RetrievalDisabled,
    GenerationDisabled,
    SearchDisabled,
    BaselineLocked,
}

impl Constraint {
    pub fn as_str(self) -> &'static str {
        match self {
            Constraint::EditQuestion => "edit_question",
            Constraint::RetrievalDisabled => "retrieval_disabled",
            Constraint::GenerationDisabled => "generation_disabled",
            Constraint::SearchDisabled => "search_disabled",
            Constraint::BaselineLocked => "baseline_locked",
        }
    }
}

impl std::fmt::Display for Constraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything a reviewer might try on one conversation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReviewAction {
    EditResponse {
        message: usize,
        text: String,
    },
    SetRelevance {
        message: usize,
        context: usize,
        relevance: Relevance,
    },
    SetEnrichments {
        message: usize,
        enrichments: EnrichmentSet,
    },
    EditQuestion {
        message: usize,
        text: String,
    },
    EditBaseline {
        message: usize,
        text: String,
    },
    RunRetrieval,
    RunGeneration,
    RunSideSearch {
        query: String,
    },
    AddPassage {
        message: usize,
        hit: SearchHit,
    },
}

impl ReviewAction {
    /// The constraint that forbids this action in review mode, if any.
    pub fn constraint(&self) -> Option<Constraint> {
        match self {
            ReviewAction::EditResponse { .. }
            | ReviewAction::SetRelevance { .. }
            | ReviewAction::SetEnrichments { .. } => None,
            ReviewAction::EditQuestion { .. } => Some(Constraint::EditQuestion),
            ReviewAction::EditBaseline { .. } => Some(Constraint::BaselineLocked),
            ReviewAction::RunRetrieval => Some(Constraint::RetrievalDisabled),
            ReviewAction::RunGeneration => Some(Constraint::GenerationDisabled),
            ReviewAction::RunSideSearch { .. } | ReviewAction::AddPassage { .. } => Some(Constraint::SearchDisabled),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReviewError {
    #[error("malformed batch: {0}")]
    Malformed(String),
    #[error("the batch is empty")]
    EmptyBatch,
    #[error("item {item}: schema violation at {violation}")]
    Schema { item: usize, violation: SchemaViolation },
    #[error("invalid batch state at {0}")]
    InvalidBatch(SchemaViolation),
    #[error("item {item} out of range (batch of {len})")]
    ItemOutOfRange { item: usize, len: usize },
    #[error("item {0} has not been visited")]
    NotVisited(usize),
    #[error("item {item} is already {state}")]
    AlreadyDecided { item: usize, state: &'static str },
    #[error("not allowed in review mode: {0}")]
    ConstraintViolation(Constraint),
    #[error(transparent)]
    Edit(#[from] EditError),
    #[error("the edit does not change anything")]
    NoChange,
    #[error("comment anchor out of range: {0}")]
    AnchorOutOfRange(String),
    #[error("comment text must not be empty")]
    EmptyComment,
    #[error("accept_with_edits requires at least one revision by the reviewer")]
    MissingEdits,
    #[error("reject requires at least one comment by the reviewer")]
    MissingRejectComment,
    #[error("undecided items: {0:?}")]
    UndecidedItems(Vec<usize>),
}

/// A batch under review. The whole value travels with each request; the
/// server keeps nothing between calls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReviewBatch {
    pub conversations: Vec<Conversation>,
    pub cursor: usize,
    pub decisions: Vec<Option<Decision>>,
    pub visited: Vec<bool>,
}

/// Parses a batch file (a JSON array of conversations). The cursor starts on
/// the first item.
pub fn load_batch(document: &[u8]) -> Result<ReviewBatch, ReviewError> {
    let value = parse_json(document).map_err(|e| match e {
        DocumentError::Malformed(m) => ReviewError::Malformed(m),
        DocumentError::Schema(v) => ReviewError::InvalidBatch(v),
    })?;
    let serde_json::Value::Array(items) = value else {
        return Err(ReviewError::Malformed("expected a JSON array of conversations".into()));
    };
    if items.is_empty() {
        return Err(ReviewError::EmptyBatch);
    }
    let conversations = items
        .into_iter()
        .enumerate()
        .map(|(item, v)| Conversation::from_value(v).map_err(|violation| ReviewError::Schema { item, violation }))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ReviewBatch::new(conversations))
}

impl ReviewBatch {
    pub fn new(conversations: Vec<Conversation>) -> Self {
        let n = conversations.len();
        let mut visited = vec![false; n];
        if n > 0 {
            visited[0] = true;
        }
        Self {
            conversations,
            cursor: 0,
            decisions: vec![None; n],
            visited,
        }
    }

    /// Checks a client-supplied batch state.
    pub fn check(&self) -> Result<(), ReviewError> {
        let n = self.conversations.len();
        if n == 0 {
            return Err(ReviewError::EmptyBatch);
        }
        for (item, conv) in self.conversations.iter().enumerate() {
            conv.check()
                .map_err(|violation| ReviewError::Schema { item, violation })?;
        }
        let bad = |path: &str, m: &str| ReviewError::InvalidBatch(SchemaViolation::new(path, m));
        if self.decisions.len() != n || self.visited.len() != n {
            return Err(bad(
                "decisions",
                "decisions and visited must have one entry per conversation",
            ));
        }
        if self.cursor >= n {
            return Err(bad("cursor", "cursor out of range"));
        }
        for (i, d) in self.decisions.iter().enumerate() {
            if let Some(d) = d {
                if !self.visited[i] {
                    return Err(bad(&format!("decisions[{i}]"), "decision on an unvisited item"));
                }
                if self.conversations[i].status.state != d.state() {
                    return Err(bad(
                        &format!("decisions[{i}]"),
                        "decision disagrees with conversation state",
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.conversations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conversations.is_empty()
    }

    pub fn current(&self) -> &Conversation {
        &self.conversations[self.cursor]
    }

    fn item_check(&self, item: usize) -> Result<(), ReviewError> {
        if item >= self.len() {
            return Err(ReviewError::ItemOutOfRange { item, len: self.len() });
        }
        Ok(())
    }

    fn undecided_check(&self, item: usize) -> Result<(), ReviewError> {
        let state = self.conversations[item].status.state;
        if state != ConversationState::Draft {
            return Err(ReviewError::AlreadyDecided {
                item,
                state: state.as_str(),
            });
        }
        Ok(())
    }

    /// Moves the cursor to `item` and marks it visited.
    pub fn goto(&self, item: usize) -> Result<ReviewBatch, ReviewError> {
        self.item_check(item)?;
        let mut next = self.clone();
        next.cursor = item;
        next.visited[item] = true;
        Ok(next)
    }

    /// Applies one reviewer action. Allowed edits record a revision under the
    /// reviewer's name; forbidden actions fail without touching the batch.
    pub fn review_edit(
        &self,
        item: usize,
        action: &ReviewAction,
        reviewer: &Stamp,
    ) -> Result<ReviewBatch, ReviewError> {
        if let Some(c) = action.constraint() {
            return Err(ReviewError::ConstraintViolation(c));
        }
        self.item_check(item)?;
        self.undecided_check(item)?;
        let conv = &self.conversations[item];
        let edited = match action {
            ReviewAction::EditResponse { message, text } => {
                if conv.messages.get(*message).is_some_and(|m| m.as_user().is_some()) {
                    return Err(ReviewError::ConstraintViolation(Constraint::EditQuestion));
                }
                create::edit_response(conv, *message, text, reviewer)?
            }
            ReviewAction::SetRelevance {
                message,
                context,
                relevance,
            } => {
                let mut next = create::edit_passage_relevance(conv, *message, *context, *relevance)?;
                let before = conv.messages[*message].as_agent().expect("checked by edit").contexts[*context].relevance;
                if before == *relevance {
                    return Err(ReviewError::NoChange);
                }
                push_revision(
                    &mut next,
                    reviewer,
                    *message,
                    format!("contexts[{context}].relevance"),
                    before.as_str().into(),
                    relevance.as_str().into(),
                );
                next
            }
            ReviewAction::SetEnrichments { message, enrichments } => {
                let mut next = create::set_enrichments(conv, *message, *enrichments)?;
                let before = conv.messages[*message].as_user().expect("checked by edit").enrichments;
                if before == *enrichments {
                    return Err(ReviewError::NoChange);
                }
                push_revision(
                    &mut next,
                    reviewer,
                    *message,
                    "enrichments".into(),
                    compact(&before),
                    compact(enrichments),
                );
                next
            }
            _ => unreachable!("forbidden actions returned above"),
        };
        let mut next = self.clone();
        next.conversations[item] = edited;
        Ok(next)
    }

    pub fn add_comment(&self, item: usize, comment: Comment) -> Result<ReviewBatch, ReviewError> {
        self.item_check(item)?;
        if comment.text.trim().is_empty() {
            return Err(ReviewError::EmptyComment);
        }
        let conv = &self.conversations[item];
        if let Some(anchor) = &comment.anchor {
            conv.check_anchor(anchor).map_err(ReviewError::AnchorOutOfRange)?;
        }
        let mut next = self.clone();
        next.conversations[item].status.comments.push(comment);
        Ok(next)
    }

    /// Records the decision, adds the reviewer to the participants and moves
    /// to the next undecided item.
    pub fn decide(&self, item: usize, decision: Decision, reviewer: &Stamp) -> Result<ReviewBatch, ReviewError> {
        self.item_check(item)?;
        if !self.visited[item] {
            return Err(ReviewError::NotVisited(item));
        }
        self.undecided_check(item)?;
        let conv = &self.conversations[item];
        match decision {
            Decision::AcceptWithEdits if !conv.status.revisions.iter().any(|r| r.editor == reviewer.editor) => {
                return Err(ReviewError::MissingEdits)
            }
            Decision::Reject if !conv.status.comments.iter().any(|c| c.author == reviewer.editor) => {
                return Err(ReviewError::MissingRejectComment)
            }
            _ => {}
        }

        let mut next = self.clone();
        let conv = &mut next.conversations[item];
        conv.status.state = decision.state();
        if !conv.participants.reviewers.contains(&reviewer.editor) {
            conv.participants.reviewers.push(reviewer.editor.clone());
        }
        conv.participants.accessed_at.push(reviewer.timestamp.clone());
        next.decisions[item] = Some(decision);

        let n = next.len();
        if let Some(following) = (1..n)
            .map(|k| (item + k) % n)
            .find(|&i| next.conversations[i].status.state == ConversationState::Draft)
        {
            next.cursor = following;
            next.visited[following] = true;
        }
        Ok(next)
    }

    /// Items still in draft state.
    pub fn undecided(&self) -> Vec<usize> {
        self.conversations
            .iter()
            .enumerate()
            .filter(|(_, c)| c.status.state == ConversationState::Draft)
            .map(|(i, _)| i)
            .collect()
    }

    /// The reviewed batch as a JSON array; every item must be decided.
    pub fn export(&self) -> Result<Vec<u8>, ReviewError> {
        let undecided = self.undecided();
        if !undecided.is_empty() {
            return Err(ReviewError::UndecidedItems(undecided));
        }
        Ok(serialize_batch(&self.conversations))
    }
}

fn compact(e: &EnrichmentSet) -> String {
    serde_json::to_string(e).expect("enrichments serialize")
}

fn push_revision(
    conv: &mut Conversation,
    reviewer: &Stamp,
    message: usize,
    field: String,
    before: String,
    after: String,
) {
    conv.status.revisions.push(Revision {
        editor: reviewer.editor.clone(),
        timestamp: reviewer.timestamp.clone(),
        target: RevisionTarget { message, field },
        before,
        after,
    });
}
