//! `{name}` placeholder substitution.
//!
//! A placeholder is `{` followed by one or more of `[a-z_]` and `}`. Any other
//! brace is literal text, so JSON snippets inside prompts survive untouched.

use thiserror::Error;

use super::GeneratorConfig;
use crate::conversation::{ContextPassage, Conversation, Message};

pub const PROMPT_PLACEHOLDERS: &[&str] = &["system", "passages", "history", "question"];
pub const PASSAGE_PLACEHOLDERS: &[&str] = &["n", "title", "text"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("unknown placeholder {{{0}}}")]
    UnknownPlaceholder(String),
    #[error("template must contain {{{0}}}")]
    MissingPlaceholder(String),
    #[error("the conversation does not end with a user message")]
    NoPendingQuestion,
}

enum Piece<'a> {
    Literal(&'a str),
    Slot(&'a str),
}

fn pieces(template: &str) -> Vec<Piece<'_>> {
    let bytes = template.as_bytes();
    let mut out = Vec::new();
    let mut literal_start = 0;
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let name_len = bytes[i + 1..]
                .iter()
                .take_while(|b| b.is_ascii_lowercase() || **b == b'_')
                .count();
            let close = i + 1 + name_len;
            if name_len > 0 && bytes.get(close) == Some(&b'}') {
                if literal_start < i {
                    out.push(Piece::Literal(&template[literal_start..i]));
                }
                out.push(Piece::Slot(&template[i + 1..close]));
                i = close + 1;
                literal_start = i;
                continue;
            }
        }
        i += 1;
    }
    if literal_start < template.len() {
        out.push(Piece::Literal(&template[literal_start..]));
    }
    out
}

/// Verifies every placeholder is in `allowed` and `required` appears.
pub(crate) fn check_template(template: &str, allowed: &[&str], required: &str) -> Result<(), String> {
    let mut has_required = false;
    for piece in pieces(template) {
        if let Piece::Slot(name) = piece {
            if !allowed.contains(&name) {
                return Err(TemplateError::UnknownPlaceholder(name.into()).to_string());
            }
            has_required |= name == required;
        }
    }
    if !has_required {
        return Err(TemplateError::MissingPlaceholder(required.into()).to_string());
    }
    Ok(())
}

pub fn fill(template: &str, allowed: &[&str], value: impl Fn(&str) -> String) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(template.len());
    for piece in pieces(template) {
        match piece {
            Piece::Literal(s) => out.push_str(s),
            Piece::Slot(name) if allowed.contains(&name) => out.push_str(&value(name)),
            Piece::Slot(name) => return Err(TemplateError::UnknownPlaceholder(name.into())),
        }
    }
    Ok(out)
}

/// `{passages}`: the passage template applied to each passage, numbered from 1.
pub fn render_passages(template: &str, passages: &[ContextPassage]) -> Result<String, TemplateError> {
    let mut out = String::new();
    for (i, p) in passages.iter().enumerate() {
        out.push_str(&fill(template, PASSAGE_PLACEHOLDERS, |name| match name {
            "n" => (i + 1).to_string(),
            "title" => p.title.clone(),
            _ => p.text.clone(),
        })?);
    }
    Ok(out)
}

/// `{history}`: one `user: …` / `agent: …` line per prior turn.
pub fn render_history(messages: &[Message]) -> String {
    messages
        .iter()
        .map(|m| format!("{}: {}\n", m.speaker(), m.text()))
        .collect()
}

/// Renders the generator prompt for the conversation's pending question.
pub fn render_prompt(
    config: &GeneratorConfig,
    conv: &Conversation,
    passages: &[ContextPassage],
) -> Result<String, TemplateError> {
    let (question, prior) = match conv.messages.split_last() {
        Some((Message::User(q), prior)) => (q.text.as_str(), prior),
        _ => return Err(TemplateError::NoPendingQuestion),
    };
    let rendered_passages = render_passages(&config.passage_template, passages)?;
    let history = render_history(prior);
    fill(&config.prompt_template, PROMPT_PLACEHOLDERS, |name| match name {
        "system" => config.system_prompt.clone(),
        "passages" => rendered_passages.clone(),
        "history" => history.clone(),
        _ => question.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_braces_survive() {
        let out = fill(r#"{"k": 1} {x} {Q} {}"#, &["x"], |_| "V".into()).unwrap();
        assert_eq!(out, r#"{"k": 1} V {Q} {}"#);
    }

    #[test]
    fn unknown_placeholder_is_an_error() {
        assert_eq!(
            fill("hi {name}", &["x"], |_| String::new()),
            Err(TemplateError::UnknownPlaceholder("name".into()))
        );
    }

    #[test]
    fn check_requires_placeholder() {
        assert!(check_template("{system}", PROMPT_PLACEHOLDERS, "question").is_err());
        assert!(check_template("{question}", PROMPT_PLACEHOLDERS, "question").is_ok());
        assert!(check_template("{question} {bogus}", PROMPT_PLACEHOLDERS, "question").is_err());
    }
}
