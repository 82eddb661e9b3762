//! Create-mode turn lifecycle: appending turns, repairing passages and
//! responses, plus the assistive views (diff, overlap, hints, export
//! checklist).
//!
//! Every edit takes the conversation by reference and returns a new value.

mod diff;
mod export;
mod hints;
mod overlap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::Generator;
use crate::conversation::{
    AgentMessage, Conversation, EnrichmentSet, Message, PassageSource, Relevance, Revision, RevisionTarget, Timestamp,
    UserMessage,
};
use crate::generation::{render_prompt, AgentTurn, GenerationError, GenerationResult, GeneratorConfig};
use crate::retrieval::SearchHit;

pub use diff::{apply_left, apply_right, word_diff, DiffKind, DiffSegment};
pub use export::{
    conversation_statistics, export_with_checklist, ChecklistItem, ConversationStats, Export, ExportChecklist,
    CHECKLIST_LABELS,
};
pub use hints::{compute_hints, Hint, HintKind};
pub use overlap::{highlight_overlap, highlight_turn, CharSpan, OverlapSpan, PassageRef, DEFAULT_MIN_NGRAM};

/// Who made an edit, and when.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stamp {
    pub editor: String,
    pub timestamp: Timestamp,
}

impl Stamp {
    pub fn new(editor: impl Into<String>, timestamp: Timestamp) -> Self {
        Self {
            editor: editor.into(),
            timestamp,
        }
    }

    pub fn now(editor: impl Into<String>) -> Self {
        Self::new(editor, Timestamp::now())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EditError {
    #[error("index {index} out of range (length {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("message {0} is not an agent turn")]
    NotAgentTurn(usize),
    #[error("message {0} is not a user turn")]
    NotUserTurn(usize),
    #[error("context ({document_id}, {passage_id}) is already attached to this turn")]
    DuplicateContext { document_id: String, passage_id: String },
    #[error("response text must not be empty")]
    EmptyResponse,
    #[error("question text must not be empty")]
    EmptyQuestion,
    #[error("new text is identical to the current text")]
    IdenticalText,
    #[error("the conversation already has a pending question")]
    AwaitingResponse,
    #[error("the conversation has no pending question")]
    NoPendingQuestion,
}

fn message_mut(conv: &mut Conversation, index: usize) -> Result<&mut Message, EditError> {
    let len = conv.messages.len();
    conv.messages
        .get_mut(index)
        .ok_or(EditError::IndexOutOfRange { index, len })
}

pub(crate) fn agent_mut(conv: &mut Conversation, index: usize) -> Result<&mut AgentMessage, EditError> {
    message_mut(conv, index)?
        .as_agent_mut()
        .ok_or(EditError::NotAgentTurn(index))
}

pub(crate) fn user_mut(conv: &mut Conversation, index: usize) -> Result<&mut UserMessage, EditError> {
    message_mut(conv, index)?
        .as_user_mut()
        .ok_or(EditError::NotUserTurn(index))
}

/// Starts a new turn with a user question.
pub fn append_question(conv: &Conversation, text: &str) -> Result<Conversation, EditError> {
    if conv.ends_with_user() {
        return Err(EditError::AwaitingResponse);
    }
    if text.trim().is_empty() {
        return Err(EditError::EmptyQuestion);
    }
    let mut next = conv.clone();
    next.messages.push(Message::user(text));
    Ok(next)
}

/// Answers the pending question with a generated turn.
pub fn append_agent_turn(conv: &Conversation, turn: &AgentTurn) -> Result<Conversation, EditError> {
    if !conv.ends_with_user() {
        return Err(EditError::NoPendingQuestion);
    }
    let mut next = conv.clone();
    next.messages
        .push(Message::agent(turn.response.text.clone(), turn.contexts.clone()));
    Ok(next)
}

pub fn edit_passage_relevance(
    conv: &Conversation,
    turn: usize,
    context: usize,
    relevance: Relevance,
) -> Result<Conversation, EditError> {
    let mut next = conv.clone();
    let agent = agent_mut(&mut next, turn)?;
    let len = agent.contexts.len();
    agent
        .contexts
        .get_mut(context)
        .ok_or(EditError::IndexOutOfRange { index: context, len })?
        .relevance = relevance;
    Ok(next)
}

/// Attaches a side-search hit to an agent turn as a relevant, searched
/// context.
pub fn add_searched_passage(conv: &Conversation, turn: usize, hit: &SearchHit) -> Result<Conversation, EditError> {
    let mut next = conv.clone();
    let agent = agent_mut(&mut next, turn)?;
    if agent
        .contexts
        .iter()
        .any(|c| c.document_id == hit.document_id && c.passage_id == hit.passage_id)
    {
        return Err(EditError::DuplicateContext {
            document_id: hit.document_id.clone(),
            passage_id: hit.passage_id.clone(),
        });
    }
    agent
        .contexts
        .push(hit.clone().into_context(PassageSource::Searched, Relevance::Relevant));
    Ok(next)
}

/// Replaces an agent response and records a revision. The first edit keeps the
/// generated text as `original_text`; later edits leave that baseline alone.
/// Editing back to the baseline clears it.
pub fn edit_response(
    conv: &Conversation,
    turn: usize,
    new_text: &str,
    stamp: &Stamp,
) -> Result<Conversation, EditError> {
    if new_text.trim().is_empty() {
        return Err(EditError::EmptyResponse);
    }
    let mut next = conv.clone();
    let agent = agent_mut(&mut next, turn)?;
    if agent.text == new_text {
        return Err(EditError::IdenticalText);
    }
    let before = std::mem::replace(&mut agent.text, new_text.to_string());
    if agent.original_text.is_none() {
        agent.original_text = Some(before.clone());
    }
    if agent.original_text.as_deref() == Some(new_text) {
        agent.original_text = None;
    }
    next.status.revisions.push(Revision {
        editor: stamp.editor.clone(),
        timestamp: stamp.timestamp.clone(),
        target: RevisionTarget {
            message: turn,
            field: "text".into(),
        },
        before,
        after: new_text.to_string(),
    });
    Ok(next)
}

pub fn set_enrichments(
    conv: &Conversation,
    turn: usize,
    enrichments: EnrichmentSet,
) -> Result<Conversation, EditError> {
    let mut next = conv.clone();
    user_mut(&mut next, turn)?.enrichments = enrichments;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegenerateError {
    #[error(transparent)]
    Edit(#[from] EditError),
    #[error(transparent)]
    Generation(#[from] GenerationError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Regenerated {
    pub conversation: Conversation,
    pub response: GenerationResult,
    pub prompt: String,
}

/// Regenerates an agent turn from its current passages (everything not marked
/// irrelevant, in display order). The new text replaces the old one and the
/// edit baseline is cleared.
pub fn regenerate_response(
    generator: &dyn Generator,
    config: &GeneratorConfig,
    conv: &Conversation,
    turn: usize,
) -> Result<Regenerated, RegenerateError> {
    let agent = conv
        .messages
        .get(turn)
        .ok_or(EditError::IndexOutOfRange {
            index: turn,
            len: conv.messages.len(),
        })?
        .as_agent()
        .ok_or(EditError::NotAgentTurn(turn))?;
    let passages: Vec<_> = agent
        .contexts
        .iter()
        .filter(|c| c.relevance != Relevance::Irrelevant)
        .cloned()
        .collect();

    let mut prefix = conv.clone();
    prefix.messages.truncate(turn);
    let prompt = render_prompt(config, &prefix, &passages).map_err(GenerationError::from)?;
    let response = generator.generate(config, &prompt)?;

    let mut next = conv.clone();
    let agent = agent_mut(&mut next, turn)?;
    agent.text = response.text.clone();
    agent.original_text = None;
    Ok(Regenerated {
        conversation: next,
        response,
        prompt,
    })
}
