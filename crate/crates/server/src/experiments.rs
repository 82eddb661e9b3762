//! In-flight experiments. Entries live in memory only and expire after the
//! configured TTL.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::Serialize;
use uuid::Uuid;

use turnsmith_core::experiment::{
    export_results, run_experiment, ExperimentError, ExperimentSpec, Progress, ProgressSnapshot, RunOptions,
};
use turnsmith_core::Backends;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunState {
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentStatus {
    pub experiment_id: String,
    pub state: RunState,
    pub progress: ProgressSnapshot,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

type Outcome = Option<Result<Arc<Vec<u8>>, ExperimentError>>;

struct Entry {
    progress: Arc<Progress>,
    outcome: Arc<Mutex<Outcome>>,
    created: Instant,
}

pub enum Fetch {
    Ready(Arc<Vec<u8>>),
    Pending(ProgressSnapshot),
    Failed(ExperimentError),
}

pub struct ExperimentRegistry {
    entries: Mutex<HashMap<Uuid, Entry>>,
    ttl: Duration,
}

impl ExperimentRegistry {
    pub fn new(ttl: Duration) -> Self {
        Self {
            entries: Mutex::new(HashMap::new()),
            ttl,
        }
    }

    fn purge(&self, entries: &mut HashMap<Uuid, Entry>) {
        entries.retain(|_, e| {
            let expired = e.created.elapsed() > self.ttl;
            if expired {
                e.progress.cancel();
            }
            !expired
        });
    }

    /// Starts the run on its own thread and returns its id.
    pub fn launch(&self, spec: ExperimentSpec, backends: Backends, options: RunOptions) -> Uuid {
        let id = Uuid::new_v4();
        let progress = Arc::new(Progress::new());
        let outcome: Arc<Mutex<Outcome>> = Arc::new(Mutex::new(None));
        {
            let progress = progress.clone();
            let outcome = outcome.clone();
            std::thread::spawn(move || {
                let result = run_experiment(&spec, &backends, options, &progress).map(|r| Arc::new(export_results(&r)));
                *outcome.lock().expect("outcome lock") = Some(result);
            });
        }
        let mut entries = self.entries.lock().expect("registry lock");
        self.purge(&mut entries);
        entries.insert(
            id,
            Entry {
                progress,
                outcome,
                created: Instant::now(),
            },
        );
        id
    }

    pub fn status(&self, id: Uuid) -> Option<ExperimentStatus> {
        let mut entries = self.entries.lock().expect("registry lock");
        self.purge(&mut entries);
        let entry = entries.get(&id)?;
        let outcome = entry.outcome.lock().expect("outcome lock");
        let (state, error) = match &*outcome {
            None => (RunState::Running, None),
            Some(Ok(_)) => (RunState::Done, None),
            Some(Err(e)) => (RunState::Failed, Some(e.to_string())),
        };
        Some(ExperimentStatus {
            experiment_id: id.to_string(),
            state,
            progress: entry.progress.snapshot(),
            error,
        })
    }

    pub fn result(&self, id: Uuid) -> Option<Fetch> {
        let mut entries = self.entries.lock().expect("registry lock");
        self.purge(&mut entries);
        let entry = entries.get(&id)?;
        let outcome = entry.outcome.lock().expect("outcome lock");
        Some(match &*outcome {
            None => Fetch::Pending(entry.progress.snapshot()),
            Some(Ok(bytes)) => Fetch::Ready(bytes.clone()),
            Some(Err(e)) => Fetch::Failed(e.clone()),
        })
    }

    /// Cancels (if still running) and forgets the experiment.
    pub fn remove(&self, id: Uuid) -> bool {
        let mut entries = self.entries.lock().expect("registry lock");
        match entries.remove(&id) {
            Some(entry) => {
                entry.progress.cancel();
                true
            }
            None => false,
        }
    }

    pub fn len(&self) -> usize {
        let mut entries = self.entries.lock().expect("registry lock");
        self.purge(&mut entries);
        entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
