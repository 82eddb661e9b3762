use serde::{Deserialize, Serialize};

use crate::text::whitespace_spans;

/// Passage windowing over whitespace tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunking {
    pub max_tokens: usize,
    pub overlap: usize,
}

impl Default for Chunking {
    fn default() -> Self {
        Self {
            max_tokens: 200,
            overlap: 0,
        }
    }
}

impl Chunking {
    pub fn is_valid(&self) -> bool {
        self.max_tokens > self.overlap
    }
}

/// Splits `text` into windows of at most `max_tokens` whitespace tokens, each
/// starting `max_tokens - overlap` tokens after the previous one. A window is
/// the original substring from its first to its last token, so inner spacing
/// survives. Returns no chunks for whitespace-only text.
///
/// Panics if `chunking` is invalid.
pub fn chunk_document(text: &str, chunking: Chunking) -> Vec<&str> {
    assert!(chunking.is_valid(), "max_tokens must exceed overlap");
    let spans = whitespace_spans(text);
    let step = chunking.max_tokens - chunking.overlap;
    let mut out = Vec::new();
    let mut start = 0;
    while start < spans.len() {
        let end = (start + chunking.max_tokens).min(spans.len());
        out.push(&text[spans[start].start..spans[end - 1].end]);
        if end == spans.len() {
            break;
        }
        start += step;
    }
    out
}
