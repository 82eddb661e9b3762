//! Lexical overlap between a response and its passages.
//!
//! Both sides are normalized to lowercase alphanumeric tokens (punctuation
//! and spacing dropped). Every maximal common token run of at least
//! `min_ngram` tokens is reported, once per (response position, passage
//! position) pair, with character spans in the original texts.

use serde::{Deserialize, Serialize};

use super::EditError;
use crate::conversation::{ContextPassage, Conversation};
use crate::text::analyze_with_offsets;

pub const DEFAULT_MIN_NGRAM: usize = 3;

/// Half-open character interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CharSpan {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PassageRef {
    pub message: usize,
    pub context: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapSpan {
    pub response_span: CharSpan,
    pub passage_ref: PassageRef,
    pub passage_span: CharSpan,
    pub length_tokens: usize,
}

struct Tokens {
    norm: Vec<String>,
    /// Character span of each token in the source text.
    spans: Vec<CharSpan>,
}

fn tokens(text: &str) -> Tokens {
    let toks = analyze_with_offsets(text);
    let mut spans = Vec::with_capacity(toks.len());
    // byte ranges are ascending, so one forward pass maps them to chars
    let mut chars = text
        .char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(text.len()))
        .enumerate()
        .peekable();
    let mut to_char = |byte: usize| -> usize {
        while let Some(&(ci, b)) = chars.peek() {
            if b == byte {
                return ci;
            }
            chars.next();
        }
        unreachable!("token offsets fall on char boundaries")
    };
    for (_, r) in &toks {
        let start = to_char(r.start);
        let end = to_char(r.end);
        spans.push(CharSpan { start, end });
    }
    Tokens {
        norm: toks.into_iter().map(|(t, _)| t).collect(),
        spans,
    }
}

/// Overlap spans of `response` against the contexts of agent message
/// `message_index`. A `min_ngram` of 0 is treated as 1.
pub fn highlight_overlap(
    response: &str,
    message_index: usize,
    passages: &[ContextPassage],
    min_ngram: usize,
) -> Vec<OverlapSpan> {
    let min_ngram = min_ngram.max(1);
    let r = tokens(response);
    let mut out = Vec::new();
    if r.norm.is_empty() {
        return out;
    }
    for (ci, passage) in passages.iter().enumerate() {
        let p = tokens(&passage.text);
        for i in 0..r.norm.len() {
            for j in 0..p.norm.len() {
                if r.norm[i] != p.norm[j] || (i > 0 && j > 0 && r.norm[i - 1] == p.norm[j - 1]) {
                    continue;
                }
                let len = r.norm[i..].iter().zip(&p.norm[j..]).take_while(|(x, y)| x == y).count();
                if len >= min_ngram {
                    out.push(OverlapSpan {
                        response_span: CharSpan {
                            start: r.spans[i].start,
                            end: r.spans[i + len - 1].end,
                        },
                        passage_ref: PassageRef {
                            message: message_index,
                            context: ci,
                        },
                        passage_span: CharSpan {
                            start: p.spans[j].start,
                            end: p.spans[j + len - 1].end,
                        },
                        length_tokens: len,
                    });
                }
            }
        }
    }
    out.sort_by_key(|s| (s.response_span, s.passage_ref, s.passage_span));
    out
}

/// Overlap for an agent turn of a conversation.
pub fn highlight_turn(conv: &Conversation, turn: usize, min_ngram: usize) -> Result<Vec<OverlapSpan>, EditError> {
    let agent = conv
        .messages
        .get(turn)
        .ok_or(EditError::IndexOutOfRange {
            index: turn,
            len: conv.messages.len(),
        })?
        .as_agent()
        .ok_or(EditError::NotAgentTurn(turn))?;
    Ok(highlight_overlap(&agent.text, turn, &agent.contexts, min_ngram))
}
