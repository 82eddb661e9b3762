use thiserror::Error;

use super::QueryStrategy;
use crate::conversation::{Conversation, Message};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("the manual query strategy requires query text")]
    MissingManualText,
    #[error("the conversation has no user message to build a query from")]
    EmptyConversation,
}

/// Builds the retrieval query for a conversation.
///
/// - `last_user_turn`: text of the final user message
/// - `concat_user_turns`: all user texts, space-joined in order
/// - `full_history`: every message text, space-joined in order
/// - `manual`: `manual_text` verbatim
pub fn formulate_query(
    conv: &Conversation,
    strategy: QueryStrategy,
    manual_text: Option<&str>,
) -> Result<String, QueryError> {
    if strategy == QueryStrategy::Manual {
        return manual_text.map(str::to_string).ok_or(QueryError::MissingManualText);
    }
    let last_user = conv
        .messages
        .iter()
        .rev()
        .find_map(Message::as_user)
        .ok_or(QueryError::EmptyConversation)?;
    Ok(match strategy {
        QueryStrategy::LastUserTurn => last_user.text.clone(),
        QueryStrategy::ConcatUserTurns => conv
            .user_turns()
            .map(|(_, u)| u.text.as_str())
            .collect::<Vec<_>>()
            .join(" "),
        QueryStrategy::FullHistory => conv.messages.iter().map(Message::text).collect::<Vec<_>>().join(" "),
        QueryStrategy::Manual => unreachable!(),
    })
}
