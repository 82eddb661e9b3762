//! The HTTP adapters against a local stub server.

use std::sync::mpsc::{channel, Receiver};
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};
use tiny_http::{Header, Response, Server};

use turnsmith_core::generation::{
    GenerationError, GeneratorConfig, GeneratorEndpoint, GeneratorEngine, StandardGenerator,
};
use turnsmith_core::retrieval::{
    FieldMapping, RemoteRetriever, RemoteRetrieverConfig, RetrievalError, RetrieverConfig, RetrieverEngine,
};
use turnsmith_core::Generator;

struct Seen {
    body: Value,
    authorization: Option<String>,
}

/// Serves every request with `reply` after `delay`; returns the base URL and
/// a log of the requests received.
fn stub(status: u16, reply: &str, delay: Duration) -> (String, Receiver<Seen>) {
    let server = Server::http("127.0.0.1:0").unwrap();
    let port = server.server_addr().to_ip().unwrap().port();
    let reply = reply.to_string();
    let (tx, rx) = channel();
    thread::spawn(move || {
        for mut req in server.incoming_requests() {
            let mut body = String::new();
            req.as_reader().read_to_string(&mut body).unwrap();
            let authorization = req
                .headers()
                .iter()
                .find(|h| h.field.equiv("authorization"))
                .map(|h| h.value.to_string());
            let _ = tx.send(Seen {
                body: serde_json::from_str(&body).unwrap_or(Value::Null),
                authorization,
            });
            thread::sleep(delay);
            let header = Header::from_bytes("content-type", "application/json").unwrap();
            let _ = req.respond(
                Response::from_string(reply.clone())
                    .with_status_code(status)
                    .with_header(header),
            );
        }
    });
    (format!("http://127.0.0.1:{port}/v1/chat/completions"), rx)
}

fn remote_generator(url: &str, token_env: Option<&str>) -> GeneratorConfig {
    let mut cfg = GeneratorConfig::new(GeneratorEngine::RemoteChat, "test-model");
    cfg.endpoint = Some(GeneratorEndpoint {
        url: url.into(),
        auth_token_env: token_env.map(str::to_string),
    });
    cfg.timeout_secs = 1;
    cfg
}

const WELL_FORMED: &str = r#"{"id":"x","choices":[{"index":0,"message":{"role":"assistant","content":"Paris is the capital."},"finish_reason":"stop"}],"usage":{"prompt_tokens":12,"completion_tokens":4}}"#;

#[test]
fn chat_completion_round_trip() {
    std::env::set_var("TURNSMITH_TEST_GEN_KEY", "sekrit");
    let (url, seen) = stub(200, WELL_FORMED, Duration::ZERO);
    let cfg = remote_generator(&url, Some("TURNSMITH_TEST_GEN_KEY"));
    let out = StandardGenerator::default()
        .generate(&cfg, "What is the capital?")
        .unwrap();
    assert_eq!(out.text, "Paris is the capital.");
    assert_eq!((out.usage.prompt_tokens, out.usage.completion_tokens), (12, 4));

    let req = seen.recv().unwrap();
    assert_eq!(req.authorization.as_deref(), Some("Bearer sekrit"));
    assert_eq!(req.body["model"], "test-model");
    assert_eq!(req.body["stream"], false);
    assert_eq!(
        req.body["messages"][0],
        json!({"role": "user", "content": "What is the capital?"})
    );
}

#[test]
fn server_errors_are_unavailable() {
    for status in [500u16, 429, 503] {
        let (url, _seen) = stub(status, r#"{"error":"nope"}"#, Duration::ZERO);
        let err = StandardGenerator::default()
            .generate(&remote_generator(&url, None), "hi")
            .unwrap_err();
        assert!(
            matches!(err, GenerationError::Unavailable { status: Some(s), .. } if s == status),
            "{status}: {err:?}"
        );
    }
}

#[test]
fn slow_server_times_out() {
    let (url, _seen) = stub(200, WELL_FORMED, Duration::from_millis(2500));
    let err = StandardGenerator::default()
        .generate(&remote_generator(&url, None), "hi")
        .unwrap_err();
    assert_eq!(err, GenerationError::Timeout(1));
}

#[test]
fn malformed_reply_is_reported() {
    for body in ["not json", r#"{"choices":[]}"#, r#"{"choices":[{"message":{}}]}"#] {
        let (url, _seen) = stub(200, body, Duration::ZERO);
        let err = StandardGenerator::default()
            .generate(&remote_generator(&url, None), "hi")
            .unwrap_err();
        assert!(matches!(err, GenerationError::MalformedResponse(_)), "{body}: {err:?}");
    }
}

#[test]
fn unreachable_endpoint() {
    let cfg = remote_generator("http://127.0.0.1:9/none", None);
    let err = StandardGenerator::default().generate(&cfg, "hi").unwrap_err();
    assert!(
        matches!(err, GenerationError::Unavailable { status: None, .. }),
        "{err:?}"
    );
}

fn remote_retriever(url: &str, mapping: FieldMapping) -> RetrieverConfig {
    let mut cfg = RetrieverConfig::embedded("wiki");
    cfg.engine = RetrieverEngine::RemoteHttp;
    cfg.remote = Some(RemoteRetrieverConfig {
        endpoint: url.into(),
        auth_token_env: None,
        field_mapping: mapping,
    });
    cfg
}

#[test]
fn remote_retriever_maps_fields() {
    let reply = json!({
        "data": {"hits": [
            {"doc": "d1", "pid": 7, "meta": {"title": "First"}, "body": "alpha", "relevance": 2.5},
            {"doc": "d2", "pid": "p2", "meta": {"title": "Second"}, "body": "beta", "relevance": 1.0},
        ]}
    });
    let (url, seen) = stub(200, &reply.to_string(), Duration::ZERO);
    let mapping = FieldMapping {
        results: "data.hits".into(),
        document_id: "doc".into(),
        passage_id: "pid".into(),
        title: "meta.title".into(),
        text: "body".into(),
        score: "relevance".into(),
    };
    let hits = RemoteRetriever::default()
        .search(&remote_retriever(&url, mapping), "who", 1)
        .unwrap();
    assert_eq!(hits.len(), 1);
    assert_eq!(
        (
            hits[0].document_id.as_str(),
            hits[0].passage_id.as_str(),
            hits[0].title.as_str()
        ),
        ("d1", "7", "First")
    );
    assert_eq!(hits[0].score, 2.5);
    let req = seen.recv().unwrap();
    assert_eq!(req.body, json!({"query": "who", "top_k": 1, "corpus_id": "wiki"}));
}

#[test]
fn remote_retriever_errors() {
    let (url, _seen) = stub(500, "down", Duration::ZERO);
    let err = RemoteRetriever::default()
        .search(&remote_retriever(&url, FieldMapping::default()), "q", 3)
        .unwrap_err();
    assert!(
        matches!(err, RetrievalError::RetrieverUnavailable { status: Some(500), .. }),
        "{err:?}"
    );

    let (url, _seen) = stub(200, r#"{"results": 3}"#, Duration::ZERO);
    let err = RemoteRetriever::default()
        .search(&remote_retriever(&url, FieldMapping::default()), "q", 3)
        .unwrap_err();
    assert!(matches!(err, RetrievalError::MalformedResponse(_)), "{err:?}");
}
