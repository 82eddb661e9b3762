use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ExperimentError, Split};
use crate::conversation::{ContextPassage, Conversation, Message, Relevance};

/// Upper bound on tasks per experiment.
pub const MAX_TASKS: usize = 100;

/// A conversation prefix ending at a user turn, with the approved agent turn
/// that followed it as the reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Task {
    /// `conv-<index>#t<turn>`; `turn` counts user turns from 1.
    pub task_id: String,
    pub conversation: usize,
    pub turn: usize,
    pub history: Vec<Message>,
    pub reference_response: String,
    pub gold_contexts: Vec<ContextPassage>,
}

impl Task {
    pub fn question(&self) -> &str {
        self.history.last().map(Message::text).unwrap_or("")
    }
}

/// Turns completed conversations into tasks. Fails rather than truncating
/// when the result would exceed [`MAX_TASKS`].
pub fn split_tasks(conversations: &[Conversation], split: Split, seed: u64) -> Result<Vec<Task>, ExperimentError> {
    if conversations.is_empty() {
        return Err(ExperimentError::EmptyDataset);
    }
    let mut turns = Vec::with_capacity(conversations.len());
    for (i, conv) in conversations.iter().enumerate() {
        if !conv.is_complete() {
            return Err(ExperimentError::IncompleteConversation(i));
        }
        turns.push(conv.messages.len() / 2);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let selected: Vec<(usize, Vec<usize>)> = turns
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let chosen = match split {
                Split::EveryTurn => (1..=n).collect(),
                Split::LastTurn => vec![n],
                Split::FirstTurn => vec![1],
                Split::RandomTurn => vec![rng.random_range(1..=n)],
            };
            (i, chosen)
        })
        .collect();

    let count: usize = selected.iter().map(|(_, t)| t.len()).sum();
    if count > MAX_TASKS {
        return Err(ExperimentError::TaskCapExceeded(count));
    }

    let mut tasks = Vec::with_capacity(count);
    for (i, chosen) in selected {
        let conv = &conversations[i];
        for turn in chosen {
            let task_id = format!("conv-{i}#t{turn}");
            let user_at = 2 * (turn - 1);
            let agent = conv.messages[user_at + 1]
                .as_agent()
                .expect("complete conversations alternate");
            if agent.text.trim().is_empty() {
                return Err(ExperimentError::EmptyReference(task_id));
            }
            tasks.push(Task {
                task_id,
                conversation: i,
                turn,
                history: conv.messages[..=user_at].to_vec(),
                reference_response: agent.text.clone(),
                gold_contexts: agent
                    .contexts
                    .iter()
                    .filter(|c| c.relevance == Relevance::Relevant)
                    .cloned()
                    .collect(),
            });
        }
    }
    if tasks.is_empty() {
        return Err(ExperimentError::EmptyDataset);
    }
    Ok(tasks)
}
