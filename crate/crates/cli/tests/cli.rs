use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use turnsmith_core::conversation::{ContextPassage, Participants, PassageSource, Relevance};
use turnsmith_core::generation::GeneratorConfig;
use turnsmith_core::retrieval::RetrieverConfig;
use turnsmith_core::{serialize_conversation, Conversation, Message};

fn turnsmith(data_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_turnsmith"))
        .arg("--data-dir")
        .arg(data_dir)
        .args(args)
        .env_remove("TURNSMITH_DATA_DIR")
        .output()
        .unwrap()
}

fn conversation(turns: usize) -> Conversation {
    let mut conv = Conversation::new(
        Participants::new("author@example.com"),
        RetrieverConfig::embedded("kb"),
        GeneratorConfig::mock(),
    );
    for t in 1..=turns {
        conv.messages.push(Message::user(format!("question {t}")));
        let ctx = ContextPassage {
            document_id: "d".into(),
            passage_id: "d::0".into(),
            title: "D".into(),
            text: "some passage".into(),
            score: 1.0,
            relevance: Relevance::Relevant,
            source: PassageSource::Retrieved,
        };
        conv.messages
            .push(Message::agent(format!("MOCK: question {t}"), vec![ctx]));
    }
    conv
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.conv.json");
    std::fs::write(&good, serialize_conversation(&conversation(2))).unwrap();
    let out = turnsmith(dir.path(), &["conv", "validate", good.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["errors"], json!([]));

    let mut bad: Value = serde_json::from_slice(&serialize_conversation(&conversation(1))).unwrap();
    bad["messages"].as_array_mut().unwrap().reverse();
    let bad_path = dir.path().join("bad.conv.json");
    std::fs::write(&bad_path, serde_json::to_vec(&bad).unwrap()).unwrap();
    let out = turnsmith(dir.path(), &["conv", "validate", bad_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("SchemaViolation at messages[0]"), "{stderr}");
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(turnsmith(dir.path(), &[]).status.code(), Some(2));
    assert_eq!(
        turnsmith(dir.path(), &["corpus", "search", "--id", "x"]).status.code(),
        Some(2)
    );
    assert_eq!(turnsmith(dir.path(), &["conv", "frobnicate"]).status.code(), Some(2));
}

#[test]
fn ingest_then_search() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("kb.jsonl");
    std::fs::write(
        &input,
        "{\"document_id\":\"a\",\"title\":\"A\",\"text\":\"the cat sat on the mat\"}\n\
         {\"document_id\":\"b\",\"title\":\"B\",\"text\":\"dogs chase cats\"}\n",
    )
    .unwrap();
    let data = dir.path().join("data");
    let out = turnsmith(
        &data,
        &["corpus", "ingest", "--id", "kb", "--input", input.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(data.join("corpora/kb.idx").exists());

    let out = turnsmith(
        &data,
        &["corpus", "search", "--id", "kb", "--query", "cat", "--top-k", "3"],
    );
    assert_eq!(out.status.code(), Some(0));
    let hits: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(hits.as_array().unwrap().len(), 1);
    assert_eq!(hits[0]["passage_id"], "a::0");

    let again = turnsmith(
        &data,
        &["corpus", "ingest", "--id", "kb", "--input", input.to_str().unwrap()],
    );
    assert_eq!(again.status.code(), Some(1));
}

#[test]
fn experiment_export_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let conversations: Vec<Value> = [conversation(1), conversation(2)]
        .iter()
        .map(|c| serde_json::from_slice(&serialize_conversation(c)).unwrap())
        .collect();
    let spec = json!({
        "conversations": conversations,
        "split": "every_turn",
        "random_seed": 3,
        "mode": "generation_only",
        "systems": [
            {"name": "mock-a", "generator_config": {"engine": "mock_echo", "model_id": "a"}},
            {"name": "mock-b", "generator_config": {"engine": "mock_echo", "model_id": "b", "system_prompt": "Be brief."}},
        ],
        "metrics": ["response_length", "rouge_l"],
    });
    let spec_path = dir.path().join("spec.json");
    std::fs::write(&spec_path, serde_json::to_vec(&spec).unwrap()).unwrap();

    let mut exports = Vec::new();
    for run in 0..2 {
        let out_path = dir.path().join(format!("run{run}.eval.json"));
        let out = turnsmith(
            dir.path(),
            &[
                "experiment",
                "run",
                "--spec",
                spec_path.to_str().unwrap(),
                "--out",
                out_path.to_str().unwrap(),
                "--workers",
                "3",
            ],
        );
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        exports.push(std::fs::read(out_path).unwrap());
    }
    assert_eq!(exports[0], exports[1]);
    let doc: Value = serde_json::from_slice(&exports[0]).unwrap();
    assert_eq!(doc["tasks"].as_array().unwrap().len(), 3);
    assert_eq!(doc["predictions"].as_array().unwrap().len(), 6);
    assert_eq!(doc["predictions"][0]["text"], "MOCK: question 1");

    let mut oversized = spec.clone();
    oversized["conversations"] = Value::Array(vec![conversations[1].clone(); 51]);
    std::fs::write(&spec_path, serde_json::to_vec(&oversized).unwrap()).unwrap();
    let out_path = dir.path().join("big.eval.json");
    let out = turnsmith(
        dir.path(),
        &[
            "experiment",
            "run",
            "--spec",
            spec_path.to_str().unwrap(),
            "--out",
            out_path.to_str().unwrap(),
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("102 tasks"));
}
