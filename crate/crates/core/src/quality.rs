//! Soft-quality report used by the export checklist and `conv validate`.

use serde::{Deserialize, Serialize};

use crate::conversation::{Answerability, Conversation, Relevance, SchemaViolation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    MissingEnrichment,
    UnmarkedRelevance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityIssue {
    pub kind: IssueKind,
    pub message: usize,
    pub detail: String,
}

/// Hard schema errors and soft-quality issues, kept apart. An empty report
/// means the conversation is export-clean.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<SchemaViolation>,
    pub issues: Vec<QualityIssue>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty() && self.issues.is_empty()
    }
}

/// Rule table:
///
/// | rule                | fires on                                                      |
/// |---------------------|---------------------------------------------------------------|
/// | missing_enrichment  | a user turn whose enrichment set is empty                     |
/// | unmarked_relevance  | an agent turn with no relevant context whose question is not  |
/// |                     | enriched as unanswerable                                      |
pub fn validate_conversation(conv: &Conversation) -> ValidationReport {
    let mut report = ValidationReport::default();
    if let Err(v) = conv.check() {
        report.errors.push(v);
    }
    for (i, msg) in conv.messages.iter().enumerate() {
        if let Some(user) = msg.as_user() {
            if user.enrichments.is_empty() {
                report.issues.push(QualityIssue {
                    kind: IssueKind::MissingEnrichment,
                    message: i,
                    detail: "user turn has no enrichments".into(),
                });
            }
        } else if let Some(agent) = msg.as_agent() {
            let unanswerable = i
                .checked_sub(1)
                .and_then(|q| conv.messages[q].as_user())
                .is_some_and(|u| u.enrichments.answerability == Some(Answerability::Unanswerable));
            if !unanswerable && !agent.contexts.iter().any(|c| c.relevance == Relevance::Relevant) {
                report.issues.push(QualityIssue {
                    kind: IssueKind::UnmarkedRelevance,
                    message: i,
                    detail: "answerable turn has no context marked relevant".into(),
                });
            }
        }
    }
    report
}
