//! A create-mode session driven through the public API, plus document
//! round-trips.

use std::sync::Arc;

use turnsmith_core::conversation::{
    Answerability, Comment, CommentAnchor, ConversationState, EnrichmentSet, MultiTurn, Participants, PassageSource,
    QuestionType, Relevance, Timestamp,
};
use turnsmith_core::create::{
    self, apply_left, apply_right, export_with_checklist, highlight_turn, word_diff, HintKind, Stamp,
};
use turnsmith_core::generation::{agent_turn, GeneratorConfig, DEFAULT_SYSTEM_PROMPT};
use turnsmith_core::retrieval::{side_search, Chunking, CorpusDocument, CorpusStore, RetrieverConfig};
use turnsmith_core::{parse_conversation, serialize_conversation, Backends, Conversation, Message};

fn store() -> Arc<CorpusStore> {
    let store = CorpusStore::in_memory();
    let docs = [
        ("paris", "Paris", "Paris is the capital of France."),
        ("berlin", "Berlin", "Berlin is the capital of Germany."),
        (
            "rivers",
            "Rivers",
            "The Seine flows through Paris and the Spree through Berlin.",
        ),
    ];
    store
        .ingest(
            "cities",
            docs.iter().map(|(id, title, text)| CorpusDocument {
                document_id: id.to_string(),
                title: title.to_string(),
                text: text.to_string(),
                metadata: Default::default(),
            }),
            Chunking::default(),
        )
        .unwrap();
    Arc::new(store)
}

fn fresh() -> Conversation {
    let mut retriever = RetrieverConfig::embedded("cities");
    retriever.top_k = 2;
    Conversation::new(
        Participants::new("author@example.com"),
        retriever,
        GeneratorConfig::mock(),
    )
}

#[test]
fn golden_agent_turn() {
    let backends = Backends::standard(store(), None);
    let conv = create::append_question(&fresh(), "What is the capital of France?").unwrap();
    let turn = agent_turn(&backends, &conv.retriever, &conv.generator, &conv, None).unwrap();
    let expected_prompt = format!(
        "{DEFAULT_SYSTEM_PROMPT}\n\nPassages:\n[1] Paris\nParis is the capital of France.\n\
         [2] Berlin\nBerlin is the capital of Germany.\n\nConversation:\n\nQuestion:\nWhat is the capital of France?"
    );
    assert_eq!(turn.prompt, expected_prompt);
    assert_eq!(turn.response.text, "MOCK: What is the capital of France?");
    assert_eq!(turn.response.latency_ms, 0);
    let ids: Vec<_> = turn.contexts.iter().map(|c| c.passage_id.as_str()).collect();
    assert_eq!(ids, ["paris::0", "berlin::0"]);
    assert!(turn.contexts.iter().all(|c| c.relevance == Relevance::Unmarked));
}

#[test]
fn two_turn_create_flow() {
    let backends = Backends::standard(store(), None);
    let editor = Stamp::new("author@example.com", Timestamp::parse("2024-05-01T10:00:00Z").unwrap());

    let conv = create::append_question(&fresh(), "What is the capital of France?").unwrap();
    let turn = agent_turn(&backends, &conv.retriever, &conv.generator, &conv, None).unwrap();
    let conv = create::append_agent_turn(&conv, &turn).unwrap();
    assert!(create::compute_hints(&conv)
        .iter()
        .any(|h| h.kind == HintKind::MarkRelevance));

    let conv = create::edit_passage_relevance(&conv, 1, 0, Relevance::Relevant).unwrap();
    let conv = create::edit_passage_relevance(&conv, 1, 1, Relevance::Irrelevant).unwrap();
    let hits = side_search(backends.retriever.as_ref(), &conv.retriever, "Seine", 3).unwrap();
    assert_eq!(hits[0].document_id, "rivers");
    let conv = create::add_searched_passage(&conv, 1, &hits[0]).unwrap();
    assert!(matches!(
        create::add_searched_passage(&conv, 1, &hits[0]),
        Err(create::EditError::DuplicateContext { .. })
    ));
    let agent = conv.messages[1].as_agent().unwrap();
    assert_eq!(agent.contexts[2].source, PassageSource::Searched);

    let regen = create::regenerate_response(backends.generator.as_ref(), &conv.generator, &conv, 1).unwrap();
    assert!(regen.prompt.contains("[2] Rivers"));
    assert!(!regen.prompt.contains("Berlin is the capital"));
    let conv = regen.conversation;

    let repaired = "Paris is the capital of France.";
    let conv = create::edit_response(&conv, 1, repaired, &editor).unwrap();
    let agent = conv.messages[1].as_agent().unwrap();
    let baseline = agent.original_text.clone().unwrap();
    let diff = word_diff(&baseline, repaired);
    assert_eq!(apply_left(&diff).join(" "), baseline);
    assert_eq!(apply_right(&diff).join(" "), repaired);
    let overlap = highlight_turn(&conv, 1, 3).unwrap();
    assert!(overlap.iter().any(|o| o.passage_ref.context == 0));

    let enrich = EnrichmentSet {
        question_type: Some(QuestionType::Factoid),
        answerability: Some(Answerability::Answerable),
        multi_turn: Some(MultiTurn::None),
    };
    let conv = create::set_enrichments(&conv, 0, enrich).unwrap();

    let conv = create::append_question(&conv, "And of Germany?").unwrap();
    let turn = agent_turn(&backends, &conv.retriever, &conv.generator, &conv, None).unwrap();
    assert!(turn
        .prompt
        .contains("user: What is the capital of France?\nagent: Paris is the capital of France.\n"));
    let conv = create::append_agent_turn(&conv, &turn).unwrap();

    let export = export_with_checklist(&conv, &[true, true]).unwrap();
    assert_eq!(export.checklist.items.len(), 4);
    assert!(export.checklist.items[0].checked && !export.checklist.items[3].checked);
    assert_eq!(export.checklist.statistics.turn_count, 2);
    assert_eq!(export.checklist.statistics.edited_responses, 1);
    let reparsed = parse_conversation(&export.document).unwrap();
    assert_eq!(reparsed, conv);
    assert_eq!(serialize_conversation(&reparsed), export.document);
}

#[test]
fn ten_turn_non_ascii_round_trip() {
    let mut conv = fresh();
    conv.participants.editors.push("éditeur@example.com".into());
    conv.participants
        .accessed_at
        .push(Timestamp::parse("2024-05-01T10:00:00+02:00").unwrap());
    for t in 0..10 {
        conv.messages
            .push(Message::user(format!("Вопрос {t}: 東京はどこ? \"quoted\" \\ tab\t")));
        conv.messages
            .push(Message::agent(format!("Ответ {t} 🚀 naïve café"), Vec::new()));
    }
    conv.status.state = ConversationState::Rejected;
    conv.status.comments.push(Comment {
        author: "rev@example.com".into(),
        text: "Проверьте 🚀".into(),
        anchor: Some(CommentAnchor {
            message: 1,
            start: 8,
            end: 9,
        }),
    });
    let bytes = serialize_conversation(&conv);
    let parsed = parse_conversation(&bytes).unwrap();
    assert_eq!(parsed, conv);
    assert_eq!(serialize_conversation(&parsed), bytes);
    assert_eq!(parsed.participants.accessed_at[0].as_str(), "2024-05-01T10:00:00+02:00");
}
