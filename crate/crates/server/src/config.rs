use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;
use turnsmith_core::experiment::DEFAULT_WORKERS;
use turnsmith_core::generation::GeneratorEndpoint;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid value for {var}: {value:?}")]
    Env { var: &'static str, value: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub listen: String,
    pub data_dir: PathBuf,
    /// Worker threads per experiment.
    pub workers: usize,
    pub experiment_ttl_secs: u64,
    pub generator: GeneratorDefaults,
}

/// Fallback endpoint for `remote_chat` configs that do not name their own.
#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorDefaults {
    pub endpoint: Option<String>,
    pub api_key_env: Option<String>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            data_dir: PathBuf::from("data"),
            workers: DEFAULT_WORKERS,
            experiment_ttl_secs: 3600,
            generator: GeneratorDefaults::default(),
        }
    }
}

impl ServerConfig {
    /// Reads the TOML file (if any), then applies `TURNSMITH_*` environment
    /// overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
                    path: path.to_path_buf(),
                    source,
                })?;
                Self::from_toml(&text).map_err(|message| ConfigError::Parse {
                    path: path.to_path_buf(),
                    message,
                })?
            }
            None => Self::default(),
        };
        config.apply_env(|var| std::env::var(var).ok())?;
        Ok(config)
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = var("TURNSMITH_LISTEN") {
            self.listen = v;
        }
        if let Some(v) = var("TURNSMITH_DATA_DIR") {
            self.data_dir = v.into();
        }
        if let Some(v) = var("TURNSMITH_WORKERS") {
            self.workers = v.parse().ok().filter(|&n| n > 0).ok_or(ConfigError::Env {
                var: "TURNSMITH_WORKERS",
                value: v,
            })?;
        }
        if let Some(v) = var("TURNSMITH_GENERATOR_ENDPOINT") {
            self.generator.endpoint = Some(v);
        }
        if let Some(v) = var("TURNSMITH_GENERATOR_API_KEY_ENV") {
            self.generator.api_key_env = Some(v);
        }
        Ok(())
    }

    pub fn default_endpoint(&self) -> Option<GeneratorEndpoint> {
        self.generator.endpoint.as_ref().map(|url| GeneratorEndpoint {
            url: url.clone(),
            auth_token_env: self.generator.api_key_env.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn toml_and_env() {
        let mut cfg = ServerConfig::from_toml(
            "listen = \"0.0.0.0:9000\"\nworkers = 2\n[generator]\nendpoint = \"http://llm/v1/chat/completions\"\n",
        )
        .unwrap();
        assert_eq!(cfg.listen, "0.0.0.0:9000");
        assert_eq!(cfg.experiment_ttl_secs, 3600);
        let env: HashMap<&str, &str> = [
            ("TURNSMITH_WORKERS", "8"),
            ("TURNSMITH_GENERATOR_API_KEY_ENV", "LLM_KEY"),
        ]
        .into();
        cfg.apply_env(|k| env.get(k).map(|v| v.to_string())).unwrap();
        assert_eq!(cfg.workers, 8);
        let ep = cfg.default_endpoint().unwrap();
        assert_eq!(ep.auth_token_env.as_deref(), Some("LLM_KEY"));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_env() {
        assert!(ServerConfig::from_toml("listen_addr = \"x\"").is_err());
        let mut cfg = ServerConfig::default();
        assert!(cfg
            .apply_env(|k| (k == "TURNSMITH_WORKERS").then(|| "zero".to_string()))
            .is_err());
    }
}
