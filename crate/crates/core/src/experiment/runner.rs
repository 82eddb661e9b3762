use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::metrics::{
    judge_prompt, metric_response_length, metric_retrieval_recall, metric_rouge_l, parse_judge_score,
};
use super::{split_tasks, ExperimentError, ExperimentSpec, Metric, Mode, SystemSpec, Task};
use crate::backend::Backends;
use crate::conversation::{ContextPassage, Conversation, Participants};
use crate::generation::{agent_turn, render_prompt, GeneratorConfig};
use crate::retrieval::{retrieve, RetrieverConfig};

pub const DEFAULT_WORKERS: usize = 4;

const JUDGE_PROBE: &str = "Reply with the single integer 5.";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub workers: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            workers: DEFAULT_WORKERS,
        }
    }
}

/// Live counters shared between the runner and observers.
#[derive(Debug, Default)]
pub struct Progress {
    done: AtomicUsize,
    failed: AtomicUsize,
    total: AtomicUsize,
    cancelled: AtomicBool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgressSnapshot {
    pub done: usize,
    pub total: usize,
    pub failed: usize,
}

impl Progress {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn snapshot(&self) -> ProgressSnapshot {
        ProgressSnapshot {
            done: self.done.load(Ordering::SeqCst),
            total: self.total.load(Ordering::SeqCst),
            failed: self.failed.load(Ordering::SeqCst),
        }
    }

    /// Asks the runner to stop picking up new work.
    pub fn cancel(&self) {
        self.cancelled.store(true, Ordering::SeqCst);
    }

    pub fn is_cancelled(&self) -> bool {
        self.cancelled.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub system: String,
    pub task_id: String,
    pub prediction: Option<String>,
    pub contexts: Vec<ContextPassage>,
    /// `None` marks a score that is not applicable or could not be obtained.
    pub scores: BTreeMap<String, Option<f64>>,
    pub latency_ms: u64,
    pub error: Option<String>,
}

impl TaskResult {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub system: String,
    pub metric: String,
    pub mean: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub tasks: Vec<Task>,
    /// System-major: every task of the first system, then the next.
    pub results: Vec<TaskResult>,
    pub aggregates: Vec<Aggregate>,
    pub progress: ProgressSnapshot,
}

/// Mean and count of the present scores for each (system, key).
pub fn aggregate(systems: &[SystemSpec], keys: &[&str], results: &[TaskResult]) -> Vec<Aggregate> {
    let mut out = Vec::new();
    for system in systems {
        for key in keys {
            let values: Vec<f64> = results
                .iter()
                .filter(|r| r.system == system.name)
                .filter_map(|r| r.scores.get(*key).copied().flatten())
                .collect();
            let count = values.len();
            out.push(Aggregate {
                system: system.name.clone(),
                metric: key.to_string(),
                mean: (count > 0).then(|| values.iter().sum::<f64>() / count as f64),
                count,
            });
        }
    }
    out
}

/// Runs every system over every task. A failing task is recorded and the run
/// continues; only spec problems, an unreachable judge or cancellation abort.
pub fn run_experiment(
    spec: &ExperimentSpec,
    backends: &Backends,
    options: RunOptions,
    progress: &Progress,
) -> Result<ExperimentResult, ExperimentError> {
    spec.check()?;
    let tasks = split_tasks(&spec.conversations, spec.split, spec.random_seed)?;
    let judge = if spec.metrics.contains(&Metric::LlmJudge) {
        let cfg = spec.judge_config.as_ref().expect("checked");
        backends
            .generator
            .generate(cfg, JUDGE_PROBE)
            .map_err(|e| ExperimentError::JudgeUnavailable(e.to_string()))?;
        Some(cfg)
    } else {
        None
    };

    let total = spec.systems.len() * tasks.len();
    progress.total.store(total, Ordering::SeqCst);
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<TaskResult>>> = (0..total).map(|_| Mutex::new(None)).collect();
    let workers = options.workers.clamp(1, total.max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if progress.is_cancelled() {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= total {
                    break;
                }
                let system = &spec.systems[i / tasks.len()];
                let task = &tasks[i % tasks.len()];
                let result = run_one(spec, backends, judge, system, task);
                if result.failed() {
                    progress.failed.fetch_add(1, Ordering::SeqCst);
                }
                *slots[i].lock().expect("slot lock") = Some(result);
                progress.done.fetch_add(1, Ordering::SeqCst);
            });
        }
    });

    if progress.is_cancelled() {
        return Err(ExperimentError::Cancelled);
    }
    let results: Vec<TaskResult> = slots
        .into_iter()
        .map(|s| s.into_inner().expect("slot lock").expect("every slot filled"))
        .collect();
    let aggregates = aggregate(&spec.systems, &spec.score_keys(), &results);
    Ok(ExperimentResult {
        spec: spec.clone(),
        tasks,
        results,
        aggregates,
        progress: progress.snapshot(),
    })
}

struct Prediction {
    text: Option<String>,
    contexts: Vec<ContextPassage>,
    latency_ms: u64,
}

fn task_conversation(
    task: &Task,
    retriever: Option<&RetrieverConfig>,
    generator: Option<&GeneratorConfig>,
) -> Conversation {
    let mut conv = Conversation::new(
        Participants::new("experiment"),
        retriever.cloned().unwrap_or_else(|| RetrieverConfig::embedded("none")),
        generator.cloned().unwrap_or_else(GeneratorConfig::mock),
    );
    conv.messages = task.history.clone();
    conv
}

fn predict(mode: Mode, backends: &Backends, system: &SystemSpec, task: &Task) -> Result<Prediction, String> {
    let rcfg = system.retriever_config.as_ref();
    let gcfg = system.generator_config.as_ref();
    let conv = task_conversation(task, rcfg, gcfg);
    match mode {
        Mode::GenerationOnly => {
            let gcfg = gcfg.expect("checked");
            let prompt = render_prompt(gcfg, &conv, &task.gold_contexts).map_err(|e| e.to_string())?;
            let out = backends.generator.generate(gcfg, &prompt).map_err(|e| e.to_string())?;
            Ok(Prediction {
                text: Some(out.text),
                contexts: task.gold_contexts.clone(),
                latency_ms: out.latency_ms,
            })
        }
        Mode::FullRag => {
            let turn = agent_turn(backends, rcfg.expect("checked"), gcfg.expect("checked"), &conv, None)
                .map_err(|e| e.to_string())?;
            Ok(Prediction {
                text: Some(turn.response.text),
                contexts: turn.contexts,
                latency_ms: turn.response.latency_ms,
            })
        }
        Mode::RetrievalOnly => {
            let contexts = retrieve(backends.retriever.as_ref(), rcfg.expect("checked"), &conv, None)
                .map_err(|e| e.to_string())?;
            Ok(Prediction {
                text: None,
                contexts,
                latency_ms: 0,
            })
        }
    }
}

fn judge_score(backends: &Backends, judge: &GeneratorConfig, task: &Task, prediction: &str) -> Option<f64> {
    let prompt = judge_prompt(task, prediction);
    (0..2).find_map(|_| {
        backends
            .generator
            .generate(judge, &prompt)
            .ok()
            .and_then(|r| parse_judge_score(&r.text))
            .map(f64::from)
    })
}

fn run_one(
    spec: &ExperimentSpec,
    backends: &Backends,
    judge: Option<&GeneratorConfig>,
    system: &SystemSpec,
    task: &Task,
) -> TaskResult {
    let mut scores: BTreeMap<String, Option<f64>> =
        spec.score_keys().into_iter().map(|k| (k.to_string(), None)).collect();
    let base = TaskResult {
        system: system.name.clone(),
        task_id: task.task_id.clone(),
        prediction: None,
        contexts: Vec::new(),
        scores: BTreeMap::new(),
        latency_ms: 0,
        error: None,
    };
    let prediction = match predict(spec.mode, backends, system, task) {
        Ok(p) => p,
        Err(error) => {
            return TaskResult {
                scores,
                error: Some(error),
                ..base
            }
        }
    };

    for metric in spec.metrics.iter().copied().filter(|m| m.applies(spec.mode)) {
        let text = prediction.text.as_deref().unwrap_or("");
        match metric {
            Metric::ResponseLength => {
                scores.insert("response_length".into(), Some(metric_response_length(text) as f64));
            }
            Metric::RougeL => {
                let r = metric_rouge_l(text, &task.reference_response);
                scores.insert("rouge_l_precision".into(), Some(r.precision));
                scores.insert("rouge_l_recall".into(), Some(r.recall));
                scores.insert("rouge_l_f1".into(), Some(r.f1));
            }
            Metric::RetrievalRecall => {
                let retrieved: BTreeSet<_> = prediction.contexts.iter().map(ContextPassage::key).collect();
                let gold: BTreeSet<_> = task.gold_contexts.iter().map(ContextPassage::key).collect();
                scores.insert("retrieval_recall".into(), metric_retrieval_recall(&retrieved, &gold));
            }
            Metric::LlmJudge => {
                let judge = judge.expect("judge configured");
                scores.insert("llm_judge".into(), judge_score(backends, judge, task, text));
            }
        }
    }

    TaskResult {
        prediction: prediction.text,
        contexts: prediction.contexts,
        latency_ms: prediction.latency_ms,
        scores,
        ..base
    }
}
