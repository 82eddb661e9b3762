//! Named corpus registry, optionally persisted under a data directory.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::Serialize;

use super::index::{valid_corpus_id, CorpusDocument, CorpusIndex, IngestError};
use super::remote::RemoteRetriever;
use super::{Chunking, RetrievalError, RetrieverConfig, RetrieverEngine, SearchHit};
use crate::backend::Retriever;

const MAGIC: &[u8; 6] = b"TSIDX\0";
const FORMAT_VERSION: u32 = 1;
const INDEX_EXT: &str = "idx";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusSummary {
    pub corpus_id: String,
    pub documents: usize,
    pub passages: usize,
    pub vocabulary: usize,
}

/// Corpora by id. Built indexes are shared read-only; ingestion is the only
/// writer.
#[derive(Debug, Default)]
pub struct CorpusStore {
    dir: Option<PathBuf>,
    corpora: RwLock<BTreeMap<String, Arc<CorpusIndex>>>,
}

impl CorpusStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (creating if needed) `<data_dir>/corpora` and loads every index
    /// found there.
    pub fn open(data_dir: impl AsRef<Path>) -> Result<Self, IngestError> {
        let dir = data_dir.as_ref().join("corpora");
        fs::create_dir_all(&dir).map_err(io_err)?;
        let mut corpora = BTreeMap::new();
        for entry in fs::read_dir(&dir).map_err(io_err)? {
            let path = entry.map_err(io_err)?.path();
            if path.extension().and_then(|e| e.to_str()) != Some(INDEX_EXT) {
                continue;
            }
            let index = read_index(&path)?;
            corpora.insert(index.corpus_id().to_string(), Arc::new(index));
        }
        Ok(Self {
            dir: Some(dir),
            corpora: RwLock::new(corpora),
        })
    }

    pub fn get(&self, corpus_id: &str) -> Option<Arc<CorpusIndex>> {
        self.corpora.read().unwrap().get(corpus_id).cloned()
    }

    pub fn contains(&self, corpus_id: &str) -> bool {
        self.corpora.read().unwrap().contains_key(corpus_id)
    }

    pub fn list(&self) -> Vec<CorpusSummary> {
        self.corpora
            .read()
            .unwrap()
            .values()
            .map(|idx| CorpusSummary {
                corpus_id: idx.corpus_id().to_string(),
                documents: idx.document_count(),
                passages: idx.passages().len(),
                vocabulary: idx.vocabulary_size(),
            })
            .collect()
    }

    /// Builds and registers a new corpus; persists it when the store is
    /// backed by a directory.
    pub fn ingest(
        &self,
        corpus_id: &str,
        documents: impl IntoIterator<Item = CorpusDocument>,
        chunking: Chunking,
    ) -> Result<Arc<CorpusIndex>, IngestError> {
        if !valid_corpus_id(corpus_id) {
            return Err(IngestError::InvalidCorpusId(corpus_id.to_string()));
        }
        if self.contains(corpus_id) {
            return Err(IngestError::DuplicateCorpus(corpus_id.to_string()));
        }
        let index = Arc::new(CorpusIndex::build(corpus_id, documents, chunking)?);

        let mut corpora = self.corpora.write().unwrap();
        if corpora.contains_key(corpus_id) {
            return Err(IngestError::DuplicateCorpus(corpus_id.to_string()));
        }
        if let Some(dir) = &self.dir {
            write_index(&dir.join(format!("{corpus_id}.{INDEX_EXT}")), &index)?;
        }
        corpora.insert(corpus_id.to_string(), index.clone());
        Ok(index)
    }

    pub fn search(
        &self,
        corpus_id: &str,
        query: &str,
        top_k: usize,
        params: super::Bm25Params,
    ) -> Result<Vec<SearchHit>, RetrievalError> {
        let index = self
            .get(corpus_id)
            .ok_or_else(|| RetrievalError::UnknownCorpus(corpus_id.to_string()))?;
        Ok(index.search(query, top_k, params))
    }
}

fn io_err(e: std::io::Error) -> IngestError {
    IngestError::Io(e.to_string())
}

fn write_index(path: &Path, index: &CorpusIndex) -> Result<(), IngestError> {
    let body = serde_json::to_vec(index).map_err(|e| IngestError::Io(e.to_string()))?;
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(io_err)?;
        f.write_all(MAGIC).map_err(io_err)?;
        f.write_all(&FORMAT_VERSION.to_le_bytes()).map_err(io_err)?;
        f.write_all(&body).map_err(io_err)?;
        f.sync_all().map_err(io_err)?;
    }
    fs::rename(&tmp, path).map_err(io_err)
}

fn read_index(path: &Path) -> Result<CorpusIndex, IngestError> {
    let bytes = fs::read(path).map_err(io_err)?;
    let bad = |m: &str| IngestError::Io(format!("{}: {m}", path.display()));
    if bytes.len() < MAGIC.len() + 4 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(bad("not an index file"));
    }
    let version = u32::from_le_bytes(bytes[MAGIC.len()..MAGIC.len() + 4].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(bad(&format!("unsupported index version {version}")));
    }
    let index: CorpusIndex = serde_json::from_slice(&bytes[MAGIC.len() + 4..]).map_err(|e| bad(&e.to_string()))?;
    if !index.is_consistent() {
        return Err(bad("inconsistent index statistics"));
    }
    Ok(index)
}

/// Reads the ingestion format: one JSON object per line with `document_id`,
/// `title`, `text` and optional `metadata`. Blank lines are skipped.
pub fn read_corpus_jsonl(reader: impl BufRead) -> Result<Vec<CorpusDocument>, IngestError> {
    let mut docs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: CorpusDocument = serde_json::from_str(&line).map_err(|e| IngestError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        docs.push(doc);
    }
    Ok(docs)
}

/// Routes a retriever config to the embedded store or the HTTP adapter.
#[derive(Debug, Clone)]
pub struct StandardRetriever {
    store: Arc<CorpusStore>,
    remote: RemoteRetriever,
}

impl StandardRetriever {
    pub fn new(store: Arc<CorpusStore>) -> Self {
        Self {
            store,
            remote: RemoteRetriever::default(),
        }
    }

    pub fn store(&self) -> &Arc<CorpusStore> {
        &self.store
    }
}

impl Retriever for StandardRetriever {
    fn search(&self, config: &RetrieverConfig, query: &str, top_k: usize) -> Result<Vec<SearchHit>, RetrievalError> {
        match config.engine {
            RetrieverEngine::EmbeddedBm25 => self.store.search(&config.corpus_id, query, top_k, config.bm25()),
            RetrieverEngine::RemoteHttp => self.remote.search(config, query, top_k),
        }
    }
}
