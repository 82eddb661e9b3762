use serde::{Deserialize, Serialize};

use crate::conversation::{Answerability, Conversation, Relevance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HintKind {
    MarkRelevance,
    AddEnrichments,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hint {
    pub kind: HintKind,
    pub message: usize,
    pub text: String,
}

/// Reminder tips, in message order. Advisory only.
///
/// - `add_enrichments` for each user turn without any enrichment
/// - `mark_relevance` for each agent turn that has contexts, none marked
///   relevant, unless its question is enriched as unanswerable
pub fn compute_hints(conv: &Conversation) -> Vec<Hint> {
    let mut hints = Vec::new();
    for (i, msg) in conv.messages.iter().enumerate() {
        if let Some(user) = msg.as_user() {
            if user.enrichments.is_empty() {
                hints.push(Hint {
                    kind: HintKind::AddEnrichments,
                    message: i,
                    text: "Add enrichments (question type, answerability, multi-turn) to this question.".into(),
                });
            }
        } else if let Some(agent) = msg.as_agent() {
            let unanswerable = i
                .checked_sub(1)
                .and_then(|q| conv.messages[q].as_user())
                .is_some_and(|u| u.enrichments.answerability == Some(Answerability::Unanswerable));
            let any_relevant = agent.contexts.iter().any(|c| c.relevance == Relevance::Relevant);
            if !agent.contexts.is_empty() && !any_relevant && !unanswerable {
                hints.push(Hint {
                    kind: HintKind::MarkRelevance,
                    message: i,
                    text: "Mark which passages are relevant to this question.".into(),
                });
            }
        }
    }
    hints
}
