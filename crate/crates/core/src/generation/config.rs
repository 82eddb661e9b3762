use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::template::{check_template, PASSAGE_PLACEHOLDERS, PROMPT_PLACEHOLDERS};
use crate::conversation::SchemaViolation;

pub const DEFAULT_SYSTEM_PROMPT: &str = "Answer the user's question using only the passages below. \
If the passages do not contain the answer, say that you do not know.";
pub const DEFAULT_PROMPT_TEMPLATE: &str =
    "{system}\n\nPassages:\n{passages}\nConversation:\n{history}\nQuestion:\n{question}";
pub const DEFAULT_PASSAGE_TEMPLATE: &str = "[{n}] {title}\n{text}\n";
pub const DEFAULT_TIMEOUT_SECS: u64 = 120;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorEngine {
    RemoteChat,
    MockEcho,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub engine: GeneratorEngine,
    pub model_id: String,
    #[serde(default = "default_prompt_template")]
    pub prompt_template: String,
    #[serde(default = "default_system_prompt")]
    pub system_prompt: String,
    #[serde(default = "default_passage_template")]
    pub passage_template: String,
    #[serde(default)]
    pub decoding: Decoding,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<GeneratorEndpoint>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    /// Opaque system-specific settings, carried but not interpreted.
    #[serde(default)]
    pub settings: BTreeMap<String, String>,
}

fn default_prompt_template() -> String {
    DEFAULT_PROMPT_TEMPLATE.into()
}
fn default_system_prompt() -> String {
    DEFAULT_SYSTEM_PROMPT.into()
}
fn default_passage_template() -> String {
    DEFAULT_PASSAGE_TEMPLATE.into()
}
fn default_timeout() -> u64 {
    DEFAULT_TIMEOUT_SECS
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Decoding {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
}

impl Default for Decoding {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            top_p: 1.0,
            max_tokens: 512,
        }
    }
}

/// The chat-completions URL plus the name of the environment variable that
/// holds its API key. The key itself never appears in documents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorEndpoint {
    pub url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_token_env: Option<String>,
}

impl GeneratorConfig {
    pub fn new(engine: GeneratorEngine, model_id: impl Into<String>) -> Self {
        Self {
            engine,
            model_id: model_id.into(),
            prompt_template: default_prompt_template(),
            system_prompt: default_system_prompt(),
            passage_template: default_passage_template(),
            decoding: Decoding::default(),
            endpoint: None,
            timeout_secs: DEFAULT_TIMEOUT_SECS,
            settings: BTreeMap::new(),
        }
    }

    pub fn mock() -> Self {
        Self::new(GeneratorEngine::MockEcho, "mock-echo")
    }

    pub fn check(&self) -> Result<(), SchemaViolation> {
        check_template(&self.prompt_template, PROMPT_PLACEHOLDERS, "question")
            .map_err(|m| SchemaViolation::new("prompt_template", m))?;
        check_template(&self.passage_template, PASSAGE_PLACEHOLDERS, "text")
            .map_err(|m| SchemaViolation::new("passage_template", m))?;
        let d = &self.decoding;
        if !(d.temperature.is_finite() && d.temperature >= 0.0) {
            return Err(SchemaViolation::new("decoding.temperature", "temperature must be >= 0"));
        }
        if !(d.top_p > 0.0 && d.top_p <= 1.0) {
            return Err(SchemaViolation::new("decoding.top_p", "top_p must lie in (0, 1]"));
        }
        if d.max_tokens == 0 {
            return Err(SchemaViolation::new(
                "decoding.max_tokens",
                "max_tokens must be positive",
            ));
        }
        if self.timeout_secs == 0 {
            return Err(SchemaViolation::new("timeout_secs", "timeout must be positive"));
        }
        Ok(())
    }
}
