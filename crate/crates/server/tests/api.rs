mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use common::{empty_conversation, start, Gate, Live, CORPUS_JSONL, USER};

fn with_corpus() -> (tempfile::TempDir, Live) {
    let dir = tempfile::tempdir().unwrap();
    let live = start(dir.path(), None);
    let r = live.post_raw(
        "/api/corpora?id=cities&max_tokens=50",
        CORPUS_JSONL.as_bytes(),
        Some(USER),
    );
    assert_eq!(r.status, 201, "{:?}", r.json());
    (dir, live)
}

fn ask(live: &Live, conv: &Value, text: &str) -> Value {
    let r = live.post("/api/create/question", &json!({"conversation": conv, "text": text}));
    assert_eq!(r.status, 200, "{:?}", r.json());
    r.json()["conversation"].clone()
}

#[test]
fn health_and_fallback() {
    let (_dir, live) = with_corpus();
    let r = live.get("/api/health");
    assert_eq!((r.status, r.json()), (200, json!({"status": "ok"})));
    let r = live.get("/api/nope");
    assert_eq!(r.status, 404);
    assert_eq!(r.json()["code"], "not_found");
}

#[test]
fn corpora_lifecycle() {
    let (_dir, live) = with_corpus();
    let list = live.get("/api/corpora");
    assert_eq!(list.status, 200);
    assert_eq!(list.json()["corpora"][0]["corpus_id"], "cities");
    assert_eq!(list.json()["corpora"][0]["passages"], 3);
    assert_eq!(live.get("/api/corpora").bytes, list.bytes);

    let dup = live.post_raw("/api/corpora?id=cities", CORPUS_JSONL.as_bytes(), Some(USER));
    assert_eq!(
        (dup.status, dup.json()["code"].clone()),
        (409, json!("duplicate_corpus"))
    );
    let bad = live.post_raw("/api/corpora?id=x", b"{not json}\n", Some(USER));
    assert_eq!(bad.status, 400);
    let missing = live.post_raw("/api/corpora", CORPUS_JSONL.as_bytes(), Some(USER));
    assert_eq!(
        (missing.status, missing.json()["code"].clone()),
        (400, json!("invalid_query"))
    );
}

#[test]
fn principal_and_malformed_bodies() {
    let (_dir, live) = with_corpus();
    let body = serde_json::to_vec(&json!({"conversation": empty_conversation("cities"), "text": "hi"})).unwrap();
    let r = live.post_raw("/api/create/question", &body, None);
    assert_eq!((r.status, r.json()["code"].clone()), (401, json!("missing_principal")));

    let r = live.post_raw("/api/chat/turn", b"{\"conversation\": ", Some(USER));
    assert_eq!((r.status, r.json()["code"].clone()), (400, json!("malformed_json")));

    let mut conv = empty_conversation("cities");
    conv["messages"] = json!([{"speaker": "agent", "text": "hello", "contexts": []}]);
    let r = live.post("/api/chat/turn", &json!({"conversation": conv}));
    assert_eq!(r.status, 422);
    assert_eq!(r.json()["code"], "schema_violation");
    assert_eq!(r.json()["path"], "conversation.messages[0]");

    let r = live.post(
        "/api/chat/turn",
        &json!({"conversation": empty_conversation("cities"), "extra": 1}),
    );
    assert_eq!(r.status, 422);
}

#[test]
fn chat_turn_is_deterministic() {
    let (_dir, live) = with_corpus();
    let conv = ask(&live, &empty_conversation("cities"), "What is the capital of France?");
    let a = live.post("/api/chat/turn", &json!({"conversation": conv}));
    let b = live.post("/api/chat/turn", &json!({"conversation": conv}));
    assert_eq!(a.status, 200);
    assert_eq!(a.bytes, b.bytes);
    let body = a.json();
    assert_eq!(body["response"]["text"], "MOCK: What is the capital of France?");
    assert_eq!(body["contexts"][0]["document_id"], "paris");
    assert_eq!(body["conversation"]["messages"].as_array().unwrap().len(), 2);

    let again = live.post("/api/chat/turn", &json!({"conversation": body["conversation"]}));
    assert_eq!(
        (again.status, again.json()["code"].clone()),
        (422, json!("no_pending_question"))
    );

    let mut unknown = ask(&live, &empty_conversation("nowhere"), "q");
    unknown["retriever"]["corpus_id"] = json!("nowhere");
    let r = live.post("/api/chat/turn", &json!({"conversation": unknown}));
    assert_eq!((r.status, r.json()["code"].clone()), (404, json!("unknown_corpus")));
}

#[test]
fn retrieve_search_generate() {
    let (_dir, live) = with_corpus();
    let retriever = json!({"engine": "embedded_bm25", "corpus_id": "cities", "top_k": 2});
    let r = live.post(
        "/api/retrieve",
        &json!({"retriever": retriever, "query": "seven hills"}),
    );
    assert_eq!(r.status, 200);
    assert_eq!(r.json()["passages"][0]["document_id"], "rome");
    assert_eq!(r.json()["passages"][0]["relevance"], "unmarked");

    let conv = ask(&live, &empty_conversation("cities"), "capital of Germany");
    let r = live.post("/api/retrieve", &json!({"retriever": retriever, "conversation": conv}));
    assert_eq!(r.json()["passages"][0]["document_id"], "berlin");

    let r = live.post(
        "/api/search",
        &json!({"retriever": retriever, "query": "Seine", "top_k": 1}),
    );
    assert_eq!(r.json()["hits"].as_array().unwrap().len(), 1);

    let generator = json!({"engine": "mock_echo", "model_id": "m"});
    let r = live.post("/api/generate", &json!({"generator": generator, "prompt": "a\nb"}));
    assert_eq!(r.json()["result"]["text"], "MOCK: b");
    let r = live.post("/api/generate", &json!({"generator": generator, "conversation": conv}));
    assert_eq!(r.json()["result"]["text"], "MOCK: capital of Germany");
}

#[test]
fn create_helpers() {
    let (_dir, live) = with_corpus();
    let conv = ask(&live, &empty_conversation("cities"), "What is the capital of France?");
    let conv = live.post("/api/chat/turn", &json!({"conversation": conv})).json()["conversation"].clone();

    let r = live.post("/api/hints", &json!({"conversation": conv}));
    let kinds: Vec<_> = r.json()["hints"]
        .as_array()
        .unwrap()
        .iter()
        .map(|h| h["kind"].clone())
        .collect();
    assert_eq!(kinds, [json!("add_enrichments"), json!("mark_relevance")]);

    let r = live.post(
        "/api/create/relevance",
        &json!({"conversation": conv, "message": 1, "context": 0, "relevance": "relevant"}),
    );
    let conv = r.json()["conversation"].clone();
    let r = live.post(
        "/api/create/response",
        &json!({"conversation": conv, "message": 1, "text": "Paris is the capital of France."}),
    );
    assert_eq!(r.status, 200);
    let conv = r.json()["conversation"].clone();
    assert_eq!(
        conv["messages"][1]["original_text"],
        "MOCK: What is the capital of France?"
    );
    assert_eq!(conv["status"]["revisions"][0]["editor"], USER);

    let r = live.post(
        "/api/diff",
        &json!({"original": "the cat sat", "edited": "the dog sat"}),
    );
    assert_eq!(
        r.json()["segments"],
        json!([
            {"kind": "equal", "tokens": ["the"]},
            {"kind": "delete", "tokens": ["cat"]},
            {"kind": "insert", "tokens": ["dog"]},
            {"kind": "equal", "tokens": ["sat"]},
        ])
    );
    let r = live.post("/api/overlap", &json!({"conversation": conv, "message": 1}));
    assert_eq!(r.json()["spans"][0]["passage_ref"], json!({"message": 1, "context": 0}));

    let r = live.post(
        "/api/create/enrichments",
        &json!({"conversation": conv, "message": 0, "enrichments": {"question_type": "factoid"}}),
    );
    let conv = r.json()["conversation"].clone();
    let r = live.post("/api/conversations/validate", &conv);
    assert_eq!(r.json()["valid"], true);
    let r = live.post(
        "/api/conversations/export",
        &json!({"conversation": conv, "acknowledgements": [true]}),
    );
    assert_eq!(r.status, 200);
    let doc: Value = serde_json::from_str(r.json()["document"].as_str().unwrap()).unwrap();
    assert_eq!(doc, conv);
    assert_eq!(r.json()["checklist"]["items"].as_array().unwrap().len(), 4);
}

#[test]
fn review_routes() {
    let (_dir, live) = with_corpus();
    let conv = ask(&live, &empty_conversation("cities"), "What is the capital of Italy?");
    let conv = live.post("/api/chat/turn", &json!({"conversation": conv})).json()["conversation"].clone();
    let r = live.post("/api/review/batch/validate", &json!([conv, conv]));
    assert_eq!(r.status, 200);
    let batch = r.json()["batch"].clone();
    assert_eq!(batch["cursor"], 0);

    let r = live.post(
        "/api/review/edit",
        &json!({"batch": batch, "item": 0, "action": {"kind": "edit_question", "message": 0, "text": "x"}}),
    );
    assert_eq!((r.status, r.json()["code"].clone()), (403, json!("edit_question")));
    let r = live.post(
        "/api/review/edit",
        &json!({"batch": batch, "item": 0, "action": {"kind": "run_retrieval"}}),
    );
    assert_eq!(r.json()["code"], "retrieval_disabled");

    let r = live.post(
        "/api/review/decide",
        &json!({"batch": batch, "item": 0, "decision": "reject"}),
    );
    assert_eq!(r.json()["code"], "missing_reject_comment");
    let batch = live
        .post(
            "/api/review/comment",
            &json!({"batch": batch, "item": 0, "text": "off topic"}),
        )
        .json()["batch"]
        .clone();
    let batch = live
        .post(
            "/api/review/decide",
            &json!({"batch": batch, "item": 0, "decision": "reject"}),
        )
        .json()["batch"]
        .clone();
    assert_eq!(batch["cursor"], 1);
    let r = live.post("/api/review/export", &json!({"batch": batch}));
    assert_eq!((r.status, r.json()["code"].clone()), (422, json!("undecided_items")));
    let batch = live
        .post(
            "/api/review/decide",
            &json!({"batch": batch, "item": 1, "decision": "accept"}),
        )
        .json()["batch"]
        .clone();
    let r = live.post("/api/review/export", &json!({"batch": batch}));
    assert_eq!(r.status, 200);
    let docs: Value = serde_json::from_str(r.json()["document"].as_str().unwrap()).unwrap();
    assert_eq!(docs[0]["status"]["state"], "rejected");
    assert_eq!(docs[1]["participants"]["reviewers"], json!([USER]));

    let r = live.post("/api/review/batch/validate", &json!([conv, {"participants": {}}]));
    assert_eq!(r.status, 422);
    assert!(r.json()["path"].as_str().unwrap().starts_with("[1]"));
}

fn experiment_spec(conv: &Value, copies: usize) -> Value {
    json!({
        "conversations": vec![conv.clone(); copies],
        "split": "every_turn",
        "mode": "full_rag",
        "systems": [
            {"name": "bm25-mock", "retriever_config": {"engine": "embedded_bm25", "corpus_id": "cities"},
             "generator_config": {"engine": "mock_echo", "model_id": "m"}},
        ],
        "metrics": ["rouge_l", "retrieval_recall"],
    })
}

#[test]
fn experiment_progress_and_result() {
    let dir = tempfile::tempdir().unwrap();
    let gate = Arc::new(Gate::default());
    let live = start(dir.path(), Some(gate.clone()));
    live.post_raw("/api/corpora?id=cities", CORPUS_JSONL.as_bytes(), Some(USER));

    let conv = ask(&live, &empty_conversation("cities"), "capital of France");
    let mut conv = conv;
    conv["messages"]
        .as_array_mut()
        .unwrap()
        .push(json!({"speaker": "agent", "text": "Paris.", "contexts": []}));

    let r = live.post("/api/experiments", &experiment_spec(&conv, 3));
    assert_eq!(r.status, 202, "{:?}", r.json());
    let id = r.json()["experiment_id"].as_str().unwrap().to_string();

    let status = live.get(&format!("/api/experiments/{id}")).json();
    assert_eq!(status["state"], "running");
    assert!(status["progress"]["done"].as_u64() < status["progress"]["total"].as_u64());
    assert_eq!(status["progress"]["total"], 3);
    let early = live.get(&format!("/api/experiments/{id}/result"));
    assert_eq!(
        (early.status, early.json()["code"].clone()),
        (409, json!("not_finished"))
    );

    gate.open();
    let deadline = Instant::now() + Duration::from_secs(10);
    let final_status = loop {
        let s = live.get(&format!("/api/experiments/{id}")).json();
        if s["state"] != "running" || Instant::now() > deadline {
            break s;
        }
        std::thread::sleep(Duration::from_millis(10));
    };
    assert_eq!(final_status["state"], "done");
    assert_eq!(final_status["progress"], json!({"done": 3, "total": 3, "failed": 0}));

    let result = live.get(&format!("/api/experiments/{id}/result"));
    assert_eq!(result.status, 200);
    assert_eq!(live.get(&format!("/api/experiments/{id}/result")).bytes, result.bytes);
    let doc = result.json();
    assert_eq!(doc["predictions"].as_array().unwrap().len(), 3);
    assert_eq!(doc["metrics"]["aggregates"][0]["metric"], "rouge_l_precision");

    assert_eq!(live.delete(&format!("/api/experiments/{id}")).status, 204);
    assert_eq!(live.get(&format!("/api/experiments/{id}")).status, 404);
    assert_eq!(live.get("/api/experiments/not-a-uuid").status, 404);

    let r = live.post("/api/experiments", &experiment_spec(&conv, 101));
    assert_eq!((r.status, r.json()["code"].clone()), (422, json!("task_cap_exceeded")));
    assert!(live.state.experiments.is_empty());
}
