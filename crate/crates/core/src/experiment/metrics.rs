use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::Task;
use crate::conversation::PassageKey;
use crate::text::whitespace_token_count;

pub fn metric_response_length(prediction: &str) -> usize {
    whitespace_token_count(prediction)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeL {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// ROUGE-L over lowercased whitespace tokens.
pub fn metric_rouge_l(prediction: &str, reference: &str) -> RougeL {
    let pred: Vec<String> = prediction.split_whitespace().map(str::to_lowercase).collect();
    let refr: Vec<String> = reference.split_whitespace().map(str::to_lowercase).collect();
    if pred.is_empty() || refr.is_empty() {
        return RougeL {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
        };
    }
    let lcs = lcs_len(&pred, &refr) as f64;
    let precision = lcs / pred.len() as f64;
    let recall = lcs / refr.len() as f64;
    let f1 = if lcs == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    RougeL { precision, recall, f1 }
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// `|retrieved ∩ gold| / |gold|`, or `None` when there is no gold.
pub fn metric_retrieval_recall(retrieved: &BTreeSet<PassageKey>, gold: &BTreeSet<PassageKey>) -> Option<f64> {
    if gold.is_empty() {
        return None;
    }
    Some(gold.intersection(retrieved).count() as f64 / gold.len() as f64)
}

pub fn judge_prompt(task: &Task, prediction: &str) -> String {
    let mut passages = String::new();
    for (i, c) in task.gold_contexts.iter().enumerate() {
        passages.push_str(&format!("[{}] {}\n{}\n", i + 1, c.title, c.text));
    }
    if passages.is_empty() {
        passages.push_str("(none)\n");
    }
    format!(
        "You are grading a candidate answer to the last question of a conversation.\n\n\
         Question:\n{}\n\nRelevant passages:\n{}\nReference answer:\n{}\n\nCandidate answer:\n{}\n\n\
         Rate the candidate from 1 (useless or unfaithful) to 10 (complete and faithful to the passages \
         and reference). Reply with a single integer only.",
        task.question(),
        passages,
        task.reference_response,
        prediction,
    )
}

/// The first integer in the reply, if it lies in 1..=10.
pub fn parse_judge_score(reply: &str) -> Option<u8> {
    let start = reply.find(|c: char| c.is_ascii_digit())?;
    if reply[..start].ends_with('-') {
        return None;
    }
    let digits: String = reply[start..].chars().take_while(char::is_ascii_digit).collect();
    let n: u64 = digits.parse().ok()?;
    (1..=10).contains(&n).then_some(n as u8)
}
