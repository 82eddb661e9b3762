use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::runner::{Aggregate, ExperimentResult};
use super::{Metric, Mode, Split, SystemSpec, Task};
use crate::conversation::{to_json_bytes, ContextPassage};

/// The `.eval.json` document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportDocument {
    pub settings: Settings,
    pub models: Vec<SystemSpec>,
    pub tasks: Vec<Task>,
    pub predictions: Vec<PredictionRecord>,
    pub metrics: MetricsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub split: Split,
    pub random_seed: u64,
    pub mode: Mode,
    pub metrics: Vec<Metric>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub model: String,
    pub task_id: String,
    pub text: Option<String>,
    pub contexts: Vec<ContextPassage>,
    pub latency_ms: u64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRecord {
    pub model: String,
    pub task_id: String,
    pub scores: BTreeMap<String, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    pub per_task: Vec<ScoreRecord>,
    pub aggregates: Vec<Aggregate>,
}

impl From<&ExperimentResult> for ExportDocument {
    fn from(result: &ExperimentResult) -> Self {
        let spec = &result.spec;
        ExportDocument {
            settings: Settings {
                split: spec.split,
                random_seed: spec.random_seed,
                mode: spec.mode,
                metrics: spec.metrics.iter().copied().collect(),
            },
            models: spec.systems.clone(),
            tasks: result.tasks.clone(),
            predictions: result
                .results
                .iter()
                .map(|r| PredictionRecord {
                    model: r.system.clone(),
                    task_id: r.task_id.clone(),
                    text: r.prediction.clone(),
                    contexts: r.contexts.clone(),
                    latency_ms: r.latency_ms,
                    error: r.error.clone(),
                })
                .collect(),
            metrics: MetricsSection {
                per_task: result
                    .results
                    .iter()
                    .map(|r| ScoreRecord {
                        model: r.system.clone(),
                        task_id: r.task_id.clone(),
                        scores: r.scores.clone(),
                    })
                    .collect(),
                aggregates: result.aggregates.clone(),
            },
        }
    }
}

pub fn export_results(result: &ExperimentResult) -> Vec<u8> {
    to_json_bytes(&ExportDocument::from(result))
}
