//! Live-server harness shared by the integration and acceptance suites.

#![allow(dead_code)]

use std::path::Path;
use std::sync::{Arc, Condvar, Mutex};

use serde_json::Value;
use turnsmith_core::backend::Generator;
use turnsmith_core::generation::{mock_echo, GenerationError, GenerationResult, GeneratorConfig, StandardGenerator};
use turnsmith_core::retrieval::{CorpusStore, StandardRetriever};
use turnsmith_core::Backends;
use turnsmith_server::{AppState, ServerConfig};

pub const USER: &str = "annotator@example.com";

pub struct Live {
    pub base: String,
    pub state: AppState,
}

/// Starts the service on an ephemeral port in a background runtime.
pub fn start(data_dir: &Path, generator: Option<Arc<dyn Generator>>) -> Live {
    let config = ServerConfig {
        data_dir: data_dir.to_path_buf(),
        ..ServerConfig::default()
    };
    let store = Arc::new(CorpusStore::open(data_dir).unwrap());
    let generator = generator.unwrap_or_else(|| Arc::new(StandardGenerator::default()));
    let backends = Backends::new(Arc::new(StandardRetriever::new(store.clone())), generator);
    let state = AppState::new(store, backends, &config);

    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let served = state.clone();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .enable_all()
            .build()
            .unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener).unwrap();
            turnsmith_server::serve_on(listener, served).await.unwrap();
        });
    });
    Live { base, state }
}

fn agent() -> ureq::Agent {
    ureq::Agent::new_with_config(ureq::Agent::config_builder().http_status_as_error(false).build())
}

pub struct Reply {
    pub status: u16,
    pub bytes: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes)
            .unwrap_or_else(|e| panic!("not JSON ({e}): {:?}", String::from_utf8_lossy(&self.bytes)))
    }
}

fn finish(resp: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> Reply {
    let mut resp = resp.unwrap();
    let status = resp.status().as_u16();
    let bytes = resp
        .body_mut()
        .with_config()
        .limit(256 * 1024 * 1024)
        .read_to_vec()
        .unwrap();
    Reply { status, bytes }
}

impl Live {
    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub fn get(&self, path: &str) -> Reply {
        finish(agent().get(&self.url(path)).call())
    }

    pub fn post_raw(&self, path: &str, body: &[u8], user: Option<&str>) -> Reply {
        let mut req = agent().post(&self.url(path)).header("content-type", "application/json");
        if let Some(user) = user {
            req = req.header("x-user-email", user);
        }
        finish(req.send(body))
    }

    pub fn post(&self, path: &str, body: &Value) -> Reply {
        self.post_raw(path, &serde_json::to_vec(body).unwrap(), Some(USER))
    }

    pub fn delete(&self, path: &str) -> Reply {
        finish(agent().delete(&self.url(path)).header("x-user-email", USER).call())
    }
}

/// A mock-echo generator that blocks every call until `open` is called.
#[derive(Default)]
pub struct Gate {
    open: Mutex<bool>,
    cv: Condvar,
}

impl Gate {
    pub fn open(&self) {
        *self.open.lock().unwrap() = true;
        self.cv.notify_all();
    }
}

impl Generator for Gate {
    fn generate(&self, _: &GeneratorConfig, prompt: &str) -> Result<GenerationResult, GenerationError> {
        let mut open = self.open.lock().unwrap();
        while !*open {
            open = self.cv.wait(open).unwrap();
        }
        Ok(mock_echo(prompt))
    }
}

pub const CORPUS_JSONL: &str = concat!(
    "{\"document_id\":\"paris\",\"title\":\"Paris\",\"text\":\"Paris is the capital of France. The Seine flows through it.\"}\n",
    "{\"document_id\":\"berlin\",\"title\":\"Berlin\",\"text\":\"Berlin is the capital of Germany.\"}\n",
    "{\"document_id\":\"rome\",\"title\":\"Rome\",\"text\":\"Rome is the capital of Italy and was founded on seven hills.\"}\n",
);

pub fn empty_conversation(corpus: &str) -> Value {
    serde_json::json!({
        "participants": {"author": USER},
        "retriever": {"engine": "embedded_bm25", "corpus_id": corpus, "top_k": 2},
        "generator": {"engine": "mock_echo", "model_id": "mock"},
        "messages": [],
        "status": {"state": "draft"},
    })
}
