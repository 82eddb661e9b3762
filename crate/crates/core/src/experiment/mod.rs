//! Experiment mode: replay finished conversations against a matrix of
//! retriever/generator systems and score the predictions.

mod export;
mod metrics;
mod runner;
mod split;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conversation::{Conversation, SchemaViolation};
use crate::generation::GeneratorConfig;
use crate::retrieval::{QueryStrategy, RetrieverConfig};

pub use export::{export_results, ExportDocument};
pub use metrics::{
    judge_prompt, metric_response_length, metric_retrieval_recall, metric_rouge_l, parse_judge_score, RougeL,
};
pub use runner::{
    run_experiment, Aggregate, ExperimentResult, Progress, ProgressSnapshot, RunOptions, TaskResult, DEFAULT_WORKERS,
};
pub use split::{split_tasks, Task, MAX_TASKS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    EveryTurn,
    LastTurn,
    FirstTurn,
    RandomTurn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    GenerationOnly,
    FullRag,
    RetrievalOnly,
}

impl Mode {
    pub fn generates(self) -> bool {
        self != Mode::RetrievalOnly
    }

    pub fn retrieves(self) -> bool {
        self != Mode::GenerationOnly
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    ResponseLength,
    RougeL,
    RetrievalRecall,
    LlmJudge,
}

impl Metric {
    /// Score keys this metric contributes to each task result.
    pub fn keys(self) -> &'static [&'static str] {
        match self {
            Metric::ResponseLength => &["response_length"],
            Metric::RougeL => &["rouge_l_precision", "rouge_l_recall", "rouge_l_f1"],
            Metric::RetrievalRecall => &["retrieval_recall"],
            Metric::LlmJudge => &["llm_judge"],
        }
    }

    /// Whether the metric means anything under `mode`.
    pub fn applies(self, mode: Mode) -> bool {
        match self {
            Metric::RetrievalRecall => mode.retrieves(),
            _ => mode.generates(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retriever_config: Option<RetrieverConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_config: Option<GeneratorConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub conversations: Vec<Conversation>,
    pub split: Split,
    #[serde(default)]
    pub random_seed: u64,
    pub mode: Mode,
    pub systems: Vec<SystemSpec>,
    pub metrics: BTreeSet<Metric>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge_config: Option<GeneratorConfig>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("malformed experiment spec: {0}")]
    Malformed(String),
    #[error("invalid experiment spec at {0}")]
    InvalidSpec(SchemaViolation),
    #[error("the dataset contains no tasks")]
    EmptyDataset,
    #[error("conversation {0} is not complete")]
    IncompleteConversation(usize),
    #[error("task {0} has an empty reference response")]
    EmptyReference(String),
    #[error("{0} tasks exceed the limit of {MAX_TASKS}")]
    TaskCapExceeded(usize),
    #[error("judge unavailable: {0}")]
    JudgeUnavailable(String),
    #[error("experiment cancelled")]
    Cancelled,
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> ExperimentError {
    ExperimentError::InvalidSpec(SchemaViolation::new(path, message))
}

impl ExperimentSpec {
    /// Parses a spec document, reporting schema errors with their JSON path.
    pub fn parse(document: &[u8]) -> Result<Self, ExperimentError> {
        use crate::conversation::{from_value_with_path, parse_json, DocumentError};
        let value = parse_json(document).map_err(|e| match e {
            DocumentError::Malformed(m) => ExperimentError::Malformed(m),
            DocumentError::Schema(v) => ExperimentError::InvalidSpec(v),
        })?;
        let spec: ExperimentSpec = from_value_with_path(value).map_err(ExperimentError::InvalidSpec)?;
        spec.check()?;
        Ok(spec)
    }

    /// Structural checks that do not need a backend.
    pub fn check(&self) -> Result<(), ExperimentError> {
        for (i, conv) in self.conversations.iter().enumerate() {
            conv.check()
                .map_err(|v| ExperimentError::InvalidSpec(v.under(&format!("conversations[{i}]"))))?;
        }
        if self.systems.is_empty() {
            return Err(invalid("systems", "at least one system is required"));
        }
        if self.metrics.is_empty() {
            return Err(invalid("metrics", "at least one metric is required"));
        }
        let mut names = BTreeSet::new();
        for (i, system) in self.systems.iter().enumerate() {
            let path = |field: &str| format!("systems[{i}].{field}");
            if system.name.trim().is_empty() {
                return Err(invalid(path("name"), "system name must not be empty"));
            }
            if !names.insert(system.name.as_str()) {
                return Err(invalid(
                    path("name"),
                    format!("duplicate system name {:?}", system.name),
                ));
            }
            if self.mode.retrieves() {
                let r = system
                    .retriever_config
                    .as_ref()
                    .ok_or_else(|| invalid(path("retriever_config"), "this mode needs a retriever"))?;
                r.check()
                    .map_err(|v| ExperimentError::InvalidSpec(v.under(&path("retriever_config"))))?;
                if r.query_strategy == QueryStrategy::Manual {
                    return Err(invalid(
                        path("retriever_config.query_strategy"),
                        "manual queries cannot be replayed",
                    ));
                }
            }
            if self.mode.generates() {
                system
                    .generator_config
                    .as_ref()
                    .ok_or_else(|| invalid(path("generator_config"), "this mode needs a generator"))?
                    .check()
                    .map_err(|v| ExperimentError::InvalidSpec(v.under(&path("generator_config"))))?;
            }
        }
        if self.metrics.contains(&Metric::LlmJudge) {
            self.judge_config
                .as_ref()
                .ok_or_else(|| invalid("judge_config", "llm_judge requires a judge_config"))?
                .check()
                .map_err(|v| ExperimentError::InvalidSpec(v.under("judge_config")))?;
        }
        Ok(())
    }

    /// Score keys recorded for every task, in export order.
    pub fn score_keys(&self) -> Vec<&'static str> {
        self.metrics.iter().flat_map(|m| m.keys().iter().copied()).collect()
    }
}
