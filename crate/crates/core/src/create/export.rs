use serde::{Deserialize, Serialize};

use crate::conversation::{serialize_conversation, Conversation, Relevance, SchemaViolation};

/// Labels of the optional pre-export checkboxes, in display order.
pub const CHECKLIST_LABELS: [&str; 4] = [
    "Every agent response was checked against its passages",
    "Relevant passages are marked for every answerable question",
    "Every question has enrichments",
    "The conversation reads naturally from turn to turn",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChecklistItem {
    pub label: String,
    pub checked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationStats {
    /// Number of user turns.
    pub turn_count: usize,
    /// Fraction of user turns with at least one enrichment.
    pub enrichment_coverage: f64,
    /// Fraction of agent turns with at least one relevant context.
    pub relevant_context_coverage: f64,
    /// Agent turns whose text differs from the generation.
    pub edited_responses: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportChecklist {
    pub items: Vec<ChecklistItem>,
    pub statistics: ConversationStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Export {
    pub document: Vec<u8>,
    pub checklist: ExportChecklist,
}

fn fraction(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn conversation_statistics(conv: &Conversation) -> ConversationStats {
    let users: Vec<_> = conv.user_turns().collect();
    let agents: Vec<_> = conv.agent_turns().collect();
    let enriched = users.iter().filter(|(_, u)| !u.enrichments.is_empty()).count();
    let with_relevant = agents
        .iter()
        .filter(|(_, a)| a.contexts.iter().any(|c| c.relevance == Relevance::Relevant))
        .count();
    ConversationStats {
        turn_count: users.len(),
        enrichment_coverage: fraction(enriched, users.len()),
        relevant_context_coverage: fraction(with_relevant, agents.len()),
        edited_responses: agents.iter().filter(|(_, a)| a.original_text.is_some()).count(),
    }
}

/// Serializes the conversation and reports the checklist. Unticked boxes never
/// block the export; missing acknowledgements count as unticked and extra ones
/// are ignored.
pub fn export_with_checklist(conv: &Conversation, acknowledgements: &[bool]) -> Result<Export, SchemaViolation> {
    conv.check()?;
    let items = CHECKLIST_LABELS
        .iter()
        .enumerate()
        .map(|(i, label)| ChecklistItem {
            label: (*label).to_string(),
            checked: acknowledgements.get(i).copied().unwrap_or(false),
        })
        .collect();
    Ok(Export {
        document: serialize_conversation(conv),
        checklist: ExportChecklist {
            items,
            statistics: conversation_statistics(conv),
        },
    })
}
