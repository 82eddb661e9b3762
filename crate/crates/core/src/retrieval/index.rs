//! Immutable inverted index with Okapi BM25 scoring.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::chunk::{chunk_document, Chunking};
use super::SearchHit;
use crate::text::analyze;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusDocument {
    pub document_id: String,
    #[serde(default)]
    pub title: String,
    pub text: String,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("corpus {0:?} already exists")]
    DuplicateCorpus(String),
    #[error("corpus {0:?} has no documents")]
    EmptyCorpus(String),
    #[error("duplicate document id {0:?}")]
    DuplicateDocumentId(String),
    #[error("document {0:?} has empty text")]
    EmptyDocument(String),
    #[error("invalid chunking: max_tokens ({max_tokens}) must exceed overlap ({overlap})")]
    InvalidChunking { max_tokens: usize, overlap: usize },
    #[error("invalid corpus id {0:?}: use letters, digits, '-', '_' or '.'")]
    InvalidCorpusId(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub document_id: String,
    pub passage_id: String,
    pub title: String,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub ordinal: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self {
            k1: super::DEFAULT_K1,
            b: super::DEFAULT_B,
        }
    }
}

/// Passages are the retrieval unit: `doc_lengths` and posting ordinals refer
/// to positions in `passages`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusIndex {
    corpus_id: String,
    document_count: usize,
    passages: Vec<Passage>,
    postings: BTreeMap<String, Vec<Posting>>,
    doc_lengths: Vec<u32>,
    avg_doc_length: f64,
}

pub(crate) fn valid_corpus_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

impl CorpusIndex {
    /// Chunks every document and builds postings. Passage ids are
    /// `<document_id>::<chunk ordinal>`.
    pub fn build(
        corpus_id: &str,
        documents: impl IntoIterator<Item = CorpusDocument>,
        chunking: Chunking,
    ) -> Result<Self, IngestError> {
        if !valid_corpus_id(corpus_id) {
            return Err(IngestError::InvalidCorpusId(corpus_id.to_string()));
        }
        if !chunking.is_valid() {
            return Err(IngestError::InvalidChunking {
                max_tokens: chunking.max_tokens,
                overlap: chunking.overlap,
            });
        }

        let mut seen = BTreeSet::new();
        let mut passages = Vec::new();
        let mut document_count = 0;
        for doc in documents {
            if !seen.insert(doc.document_id.clone()) {
                return Err(IngestError::DuplicateDocumentId(doc.document_id));
            }
            let chunks = chunk_document(&doc.text, chunking);
            if chunks.is_empty() {
                return Err(IngestError::EmptyDocument(doc.document_id));
            }
            document_count += 1;
            for (i, chunk) in chunks.into_iter().enumerate() {
                passages.push(Passage {
                    document_id: doc.document_id.clone(),
                    passage_id: format!("{}::{i}", doc.document_id),
                    title: doc.title.clone(),
                    text: chunk.to_string(),
                });
            }
        }
        if passages.is_empty() {
            return Err(IngestError::EmptyCorpus(corpus_id.to_string()));
        }
        Ok(Self::from_passages(corpus_id.to_string(), document_count, passages))
    }

    fn from_passages(corpus_id: String, document_count: usize, passages: Vec<Passage>) -> Self {
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_lengths = Vec::with_capacity(passages.len());
        for (ordinal, passage) in passages.iter().enumerate() {
            let tokens = analyze(&passage.text);
            doc_lengths.push(tokens.len() as u32);
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in tokens {
                *tf.entry(t).or_default() += 1;
            }
            for (term, count) in tf {
                postings.entry(term).or_default().push(Posting {
                    ordinal: ordinal as u32,
                    tf: count,
                });
            }
        }
        let total: u64 = doc_lengths.iter().map(|&l| l as u64).sum();
        let avg_doc_length = total as f64 / doc_lengths.len() as f64;
        Self {
            corpus_id,
            document_count,
            passages,
            postings,
            doc_lengths,
            avg_doc_length,
        }
    }

    pub fn corpus_id(&self) -> &str {
        &self.corpus_id
    }

    pub fn document_count(&self) -> usize {
        self.document_count
    }

    pub fn passages(&self) -> &[Passage] {
        &self.passages
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn doc_lengths(&self) -> &[u32] {
        &self.doc_lengths
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn vocabulary_size(&self) -> usize {
        self.postings.len()
    }

    /// Internal consistency of a (possibly deserialized) index.
    pub(crate) fn is_consistent(&self) -> bool {
        let n = self.passages.len();
        if self.doc_lengths.len() != n || n == 0 {
            return false;
        }
        let total: u64 = self.doc_lengths.iter().map(|&l| l as u64).sum();
        let avg = total as f64 / n as f64;
        avg == self.avg_doc_length
            && self
                .postings
                .values()
                .flatten()
                .all(|p| (p.ordinal as usize) < n && p.tf > 0)
    }

    /// Okapi BM25 with `idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5))`.
    ///
    /// Every occurrence of a term in the query contributes. Only passages with
    /// a positive score are returned, ordered by score descending, then
    /// document id and passage id ascending.
    pub fn search(&self, query: &str, top_k: usize, params: Bm25Params) -> Vec<SearchHit> {
        let terms = analyze(query);
        if terms.is_empty() || top_k == 0 {
            return Vec::new();
        }
        let n = self.passages.len() as f64;
        let avgdl = self.avg_doc_length;
        let Bm25Params { k1, b } = params;

        let mut scores: HashMap<u32, f64> = HashMap::new();
        for term in &terms {
            let postings = self.postings(term);
            if postings.is_empty() {
                continue;
            }
            let df = postings.len() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            for p in postings {
                let tf = p.tf as f64;
                let dl = self.doc_lengths[p.ordinal as usize] as f64;
                let norm = if avgdl > 0.0 { dl / avgdl } else { 0.0 };
                let score = idf * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * norm));
                *scores.entry(p.ordinal).or_insert(0.0) += score;
            }
        }

        let mut ranked: Vec<(u32, f64)> = scores.into_iter().filter(|&(_, s)| s > 0.0).collect();
        ranked.sort_by(|a, b| self.rank_order(*a, *b));
        ranked.truncate(top_k);
        ranked
            .into_iter()
            .map(|(ordinal, score)| {
                let p = &self.passages[ordinal as usize];
                SearchHit {
                    document_id: p.document_id.clone(),
                    passage_id: p.passage_id.clone(),
                    title: p.title.clone(),
                    text: p.text.clone(),
                    score,
                }
            })
            .collect()
    }

    fn rank_order(&self, a: (u32, f64), b: (u32, f64)) -> Ordering {
        let pa = &self.passages[a.0 as usize];
        let pb = &self.passages[b.0 as usize];
        b.1.total_cmp(&a.1)
            .then_with(|| pa.document_id.cmp(&pb.document_id))
            .then_with(|| pa.passage_id.cmp(&pb.passage_id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, text: &str) -> CorpusDocument {
        CorpusDocument {
            document_id: id.into(),
            title: format!("Title {id}"),
            text: text.into(),
            metadata: BTreeMap::new(),
        }
    }

    fn animals() -> CorpusIndex {
        CorpusIndex::build(
            "animals",
            vec![
                doc("d1", "the cat sat"),
                doc("d2", "the dog ran"),
                doc("d3", "cat and dog"),
            ],
            Chunking::default(),
        )
        .unwrap()
    }

    #[test]
    fn statistics_are_consistent() {
        let idx = animals();
        assert_eq!(idx.doc_lengths(), [3, 3, 3]);
        assert_eq!(idx.avg_doc_length(), 3.0);
        assert_eq!(idx.vocabulary_size(), 6);
        assert_eq!(idx.postings("cat").len(), 2);
        assert!(idx.is_consistent());
    }

    #[test]
    fn single_doc_gets_passage_zero() {
        let idx = CorpusIndex::build("c", vec![doc("a", "one two three")], Chunking::default()).unwrap();
        assert_eq!(idx.passages()[0].passage_id, "a::0");
    }

    #[test]
    fn cat_query_matches_frozen_scores() {
        // N = 3, df(cat) = 2: idf = ln(1 + 1.5/2.5) = ln 1.6; all lengths equal
        // avgdl, so the tf part is 1 * 2.2 / (1 + 1.2) = 1.
        let hits = animals().search("cat", 5, Bm25Params::default());
        let ids: Vec<_> = hits.iter().map(|h| h.document_id.as_str()).collect();
        assert_eq!(ids, ["d1", "d3"]);
        for h in &hits {
            assert!((h.score - 1.6f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn absent_term_and_empty_query_return_nothing() {
        let idx = animals();
        assert!(idx.search("zebra", 5, Bm25Params::default()).is_empty());
        assert!(idx.search("  ?! ", 5, Bm25Params::default()).is_empty());
    }

    #[test]
    fn top_one_is_the_head_of_the_ranking() {
        let idx = animals();
        let all = idx.search("cat", 5, Bm25Params::default());
        let one = idx.search("cat", 1, Bm25Params::default());
        assert_eq!(one, all[..1]);
    }

    #[test]
    fn build_errors() {
        assert_eq!(
            CorpusIndex::build("c", vec![doc("a", "x"), doc("a", "y")], Chunking::default()).unwrap_err(),
            IngestError::DuplicateDocumentId("a".into())
        );
        assert_eq!(
            CorpusIndex::build("c", Vec::new(), Chunking::default()).unwrap_err(),
            IngestError::EmptyCorpus("c".into())
        );
        assert!(matches!(
            CorpusIndex::build(
                "c",
                vec![doc("a", "x")],
                Chunking {
                    max_tokens: 2,
                    overlap: 2
                }
            ),
            Err(IngestError::InvalidChunking { .. })
        ));
        assert!(matches!(
            CorpusIndex::build("../etc", vec![doc("a", "x")], Chunking::default()),
            Err(IngestError::InvalidCorpusId(_))
        ));
        assert!(matches!(
            CorpusIndex::build("c", vec![doc("a", "   ")], Chunking::default()),
            Err(IngestError::EmptyDocument(_))
        ));
    }
}
