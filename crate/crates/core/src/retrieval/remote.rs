//! Generic RESTful retriever adapter.
//!
//! Request: `POST <endpoint>` with `{"query", "top_k", "corpus_id"}`.
//! Response: any JSON document; the configured [`FieldMapping`] locates the
//! hit array and the fields of each hit.

use std::time::Duration;

use serde_json::{json, Value};

use super::{FieldMapping, RetrievalError, RetrieverConfig, SearchHit};
use crate::http::{lookup, post_json, token_from_env, HttpFailure};

#[derive(Debug, Clone)]
pub struct RemoteRetriever {
    timeout: Duration,
}

impl Default for RemoteRetriever {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(30),
        }
    }
}

impl RemoteRetriever {
    pub fn with_timeout(timeout: Duration) -> Self {
        Self { timeout }
    }

    pub fn search(
        &self,
        config: &RetrieverConfig,
        query: &str,
        top_k: usize,
    ) -> Result<Vec<SearchHit>, RetrievalError> {
        let remote = config
            .remote
            .as_ref()
            .ok_or_else(|| RetrievalError::RetrieverUnavailable {
                status: None,
                detail: "no remote endpoint configured".into(),
            })?;
        let body = json!({
            "query": query,
            "top_k": top_k,
            "corpus_id": config.corpus_id,
        });
        let token = token_from_env(remote.auth_token_env.as_deref());
        let text = post_json(&remote.endpoint, token.as_deref(), &body, self.timeout).map_err(|f| match f {
            HttpFailure::Status { status, body } => RetrievalError::RetrieverUnavailable {
                status: Some(status),
                detail: truncate(&body),
            },
            HttpFailure::Timeout => RetrievalError::RetrieverUnavailable {
                status: None,
                detail: "request timed out".into(),
            },
            HttpFailure::Transport(detail) => RetrievalError::RetrieverUnavailable { status: None, detail },
        })?;
        let value: Value = serde_json::from_str(&text).map_err(|e| RetrievalError::MalformedResponse(e.to_string()))?;
        let mut hits = map_hits(&value, &remote.field_mapping)?;
        hits.truncate(top_k);
        Ok(hits)
    }
}

fn truncate(s: &str) -> String {
    const MAX: usize = 200;
    match s.char_indices().nth(MAX) {
        Some((i, _)) => format!("{}…", &s[..i]),
        None => s.to_string(),
    }
}

fn string_field(hit: &Value, path: &str) -> Option<String> {
    match lookup(hit, path)? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Maps a remote response onto hits. `document_id` and `text` are required;
/// `passage_id` falls back to the document id, `title` to empty and `score`
/// to zero.
pub(crate) fn map_hits(value: &Value, mapping: &FieldMapping) -> Result<Vec<SearchHit>, RetrievalError> {
    let malformed = |m: String| RetrievalError::MalformedResponse(m);
    let items = lookup(value, &mapping.results)
        .and_then(Value::as_array)
        .ok_or_else(|| malformed(format!("no hit array at {:?}", mapping.results)))?;
    items
        .iter()
        .enumerate()
        .map(|(i, hit)| {
            let document_id = string_field(hit, &mapping.document_id)
                .ok_or_else(|| malformed(format!("hit {i}: missing {:?}", mapping.document_id)))?;
            let text = string_field(hit, &mapping.text)
                .ok_or_else(|| malformed(format!("hit {i}: missing {:?}", mapping.text)))?;
            let passage_id = string_field(hit, &mapping.passage_id).unwrap_or_else(|| document_id.clone());
            let title = string_field(hit, &mapping.title).unwrap_or_default();
            let score = match lookup(hit, &mapping.score) {
                None | Some(Value::Null) => 0.0,
                Some(v) => v
                    .as_f64()
                    .filter(|s| s.is_finite() && *s >= 0.0)
                    .ok_or_else(|| malformed(format!("hit {i}: score must be a non-negative number")))?,
            };
            Ok(SearchHit {
                document_id,
                passage_id,
                title,
                text,
                score,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn custom_mapping_reads_nested_fields() {
        let mapping = FieldMapping {
            results: "hits.hits".into(),
            document_id: "_id".into(),
            passage_id: "_source.pid".into(),
            title: "_source.title".into(),
            text: "_source.body".into(),
            score: "_score".into(),
        };
        let v = json!({"hits": {"hits": [
            {"_id": "d1", "_score": 2.5, "_source": {"pid": "p1", "title": "T", "body": "text"}},
            {"_id": 7, "_source": {"body": "other"}}
        ]}});
        let hits = map_hits(&v, &mapping).unwrap();
        assert_eq!(hits[0].passage_id, "p1");
        assert_eq!(hits[0].score, 2.5);
        assert_eq!(hits[1].document_id, "7");
        assert_eq!(hits[1].passage_id, "7");
        assert_eq!(hits[1].score, 0.0);
    }

    #[test]
    fn missing_text_is_malformed() {
        let v = json!({"results": [{"document_id": "d"}]});
        assert!(matches!(
            map_hits(&v, &FieldMapping::default()),
            Err(RetrievalError::MalformedResponse(_))
        ));
        let v = json!({"results": [{"document_id": "d", "text": "t", "score": -1}]});
        assert!(map_hits(&v, &FieldMapping::default()).is_err());
    }
}
