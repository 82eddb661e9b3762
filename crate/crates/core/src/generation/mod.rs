//! Prompt assembly and pluggable response generation.

mod config;
mod remote;
mod template;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::Backends;
use crate::conversation::{ContextPassage, Conversation, SchemaViolation};
use crate::retrieval::{retrieve, RetrievalError, RetrieverConfig};
use crate::text::whitespace_token_count;

pub use config::{
    Decoding, GeneratorConfig, GeneratorEndpoint, GeneratorEngine, DEFAULT_PASSAGE_TEMPLATE, DEFAULT_PROMPT_TEMPLATE,
    DEFAULT_SYSTEM_PROMPT, DEFAULT_TIMEOUT_SECS,
};
pub use template::{render_history, render_passages, render_prompt, TemplateError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub text: String,
    pub usage: Usage,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenerationError {
    #[error("generator unavailable{}: {detail}", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    Unavailable { status: Option<u16>, detail: String },
    #[error("generator did not answer within {0} s")]
    Timeout(u64),
    #[error("malformed generator response: {0}")]
    MalformedResponse(String),
    #[error("invalid generator config at {0}")]
    InvalidConfig(SchemaViolation),
    #[error(transparent)]
    Template(#[from] TemplateError),
}

/// `MOCK: ` followed by the last line of the prompt.
pub fn mock_echo(prompt: &str) -> GenerationResult {
    let last = prompt.lines().last().unwrap_or("");
    let text = format!("MOCK: {last}");
    GenerationResult {
        usage: Usage {
            prompt_tokens: whitespace_token_count(prompt) as u64,
            completion_tokens: whitespace_token_count(&text) as u64,
        },
        text,
        latency_ms: 0,
    }
}

/// Dispatches on the configured engine. Remote configs without their own
/// endpoint fall back to the process-wide default, if one is set.
#[derive(Debug, Clone, Default)]
pub struct StandardGenerator {
    default_endpoint: Option<GeneratorEndpoint>,
}

impl StandardGenerator {
    pub fn new(default_endpoint: Option<GeneratorEndpoint>) -> Self {
        Self { default_endpoint }
    }
}

impl crate::backend::Generator for StandardGenerator {
    fn generate(&self, config: &GeneratorConfig, prompt: &str) -> Result<GenerationResult, GenerationError> {
        config.check().map_err(GenerationError::InvalidConfig)?;
        match config.engine {
            GeneratorEngine::MockEcho => Ok(mock_echo(prompt)),
            GeneratorEngine::RemoteChat => {
                let endpoint = config
                    .endpoint
                    .as_ref()
                    .or(self.default_endpoint.as_ref())
                    .ok_or_else(|| GenerationError::Unavailable {
                        status: None,
                        detail: "no generator endpoint configured".into(),
                    })?;
                remote::complete(config, endpoint, prompt)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentTurnError {
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Generation(#[from] GenerationError),
}

/// The outcome of one live agent turn. `contexts` are exactly the passages
/// rendered into `prompt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTurn {
    pub response: GenerationResult,
    pub contexts: Vec<ContextPassage>,
    pub prompt: String,
}

/// Retrieve, render, generate. A retrieval failure aborts before the
/// generator is called.
pub fn agent_turn(
    backends: &Backends,
    retriever_config: &RetrieverConfig,
    generator_config: &GeneratorConfig,
    conv: &Conversation,
    manual_query: Option<&str>,
) -> Result<AgentTurn, AgentTurnError> {
    if !conv.ends_with_user() {
        return Err(GenerationError::Template(TemplateError::NoPendingQuestion).into());
    }
    generator_config.check().map_err(GenerationError::InvalidConfig)?;
    let contexts = retrieve(backends.retriever.as_ref(), retriever_config, conv, manual_query)?;
    let prompt = render_prompt(generator_config, conv, &contexts).map_err(GenerationError::from)?;
    let response = backends.generator.generate(generator_config, &prompt)?;
    Ok(AgentTurn {
        response,
        contexts,
        prompt,
    })
}
