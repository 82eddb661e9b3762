//! OpenAI-style chat-completions adapter.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{GenerationError, GenerationResult, GeneratorConfig, GeneratorEndpoint, Usage};
use crate::http::{post_json, token_from_env, HttpFailure};

#[derive(Debug, Serialize)]
pub(crate) struct ChatRequest<'a> {
    pub model: &'a str,
    pub messages: Vec<ChatMessage<'a>>,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub stream: bool,
}

#[derive(Debug, Serialize)]
pub(crate) struct ChatMessage<'a> {
    pub role: &'a str,
    pub content: &'a str,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Debug, Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

#[derive(Debug, Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

pub(crate) fn request_body(config: &GeneratorConfig, prompt: &str) -> serde_json::Value {
    let req = ChatRequest {
        model: &config.model_id,
        messages: vec![ChatMessage {
            role: "user",
            content: prompt,
        }],
        temperature: config.decoding.temperature,
        top_p: config.decoding.top_p,
        max_tokens: config.decoding.max_tokens,
        stream: false,
    };
    serde_json::to_value(req).expect("chat request serializes")
}

/// Extracts the first choice's text from a chat-completions reply.
pub(crate) fn parse_reply(body: &str) -> Result<(String, Usage), GenerationError> {
    let reply: ChatResponse =
        serde_json::from_str(body).map_err(|e| GenerationError::MalformedResponse(e.to_string()))?;
    let first = reply
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| GenerationError::MalformedResponse("response has no choices".into()))?;
    let text = first
        .message
        .content
        .ok_or_else(|| GenerationError::MalformedResponse("first choice has no content".into()))?;
    let usage = reply
        .usage
        .map(|u| Usage {
            prompt_tokens: u.prompt_tokens,
            completion_tokens: u.completion_tokens,
        })
        .unwrap_or_default();
    Ok((text, usage))
}

pub(crate) fn complete(
    config: &GeneratorConfig,
    endpoint: &GeneratorEndpoint,
    prompt: &str,
) -> Result<GenerationResult, GenerationError> {
    let token = token_from_env(endpoint.auth_token_env.as_deref());
    let timeout = Duration::from_secs(config.timeout_secs);
    let started = Instant::now();
    let body =
        post_json(&endpoint.url, token.as_deref(), &request_body(config, prompt), timeout).map_err(|f| match f {
            HttpFailure::Status { status, body } => GenerationError::Unavailable {
                status: Some(status),
                detail: body.chars().take(200).collect(),
            },
            HttpFailure::Timeout => GenerationError::Timeout(config.timeout_secs),
            HttpFailure::Transport(detail) => GenerationError::Unavailable { status: None, detail },
        })?;
    let (text, usage) = parse_reply(&body)?;
    Ok(GenerationResult {
        text,
        usage,
        latency_ms: started.elapsed().as_millis() as u64,
    })
}
