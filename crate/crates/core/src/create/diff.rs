//! Word-level LCS diff between an original and an edited response.
//!
//! Tokens are whitespace-delimited words. The alignment is a longest common
//! subsequence found with Hirschberg's linear-space recursion; within each
//! changed region deletions are emitted before insertions.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffKind {
    Equal,
    Insert,
    Delete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffSegment {
    pub kind: DiffKind,
    pub tokens: Vec<String>,
}

pub fn word_diff(original: &str, edited: &str) -> Vec<DiffSegment> {
    let a: Vec<&str> = original.split_whitespace().collect();
    let b: Vec<&str> = edited.split_whitespace().collect();
    diff_tokens(&a, &b)
}

pub(crate) fn diff_tokens(a: &[&str], b: &[&str]) -> Vec<DiffSegment> {
    let prefix = a.iter().zip(b).take_while(|(x, y)| x == y).count();
    let suffix = a[prefix..]
        .iter()
        .rev()
        .zip(b[prefix..].iter().rev())
        .take_while(|(x, y)| x == y)
        .count();

    let mut ops = Vec::with_capacity(a.len() + b.len());
    ops.extend(std::iter::repeat_n(DiffKind::Equal, prefix));
    align(&a[prefix..a.len() - suffix], &b[prefix..b.len() - suffix], &mut ops);
    ops.extend(std::iter::repeat_n(DiffKind::Equal, suffix));
    normalize_changes(&mut ops);
    segments(&ops, a, b)
}

/// Appends an LCS alignment of `a` against `b` as a sequence of ops.
fn align(a: &[&str], b: &[&str], ops: &mut Vec<DiffKind>) {
    if a.is_empty() {
        ops.extend(std::iter::repeat_n(DiffKind::Insert, b.len()));
        return;
    }
    if b.is_empty() {
        ops.extend(std::iter::repeat_n(DiffKind::Delete, a.len()));
        return;
    }
    if a.len() == 1 {
        match b.iter().position(|t| *t == a[0]) {
            Some(j) => {
                ops.extend(std::iter::repeat_n(DiffKind::Insert, j));
                ops.push(DiffKind::Equal);
                ops.extend(std::iter::repeat_n(DiffKind::Insert, b.len() - j - 1));
            }
            None => {
                ops.push(DiffKind::Delete);
                ops.extend(std::iter::repeat_n(DiffKind::Insert, b.len()));
            }
        }
        return;
    }
    let mid = a.len() / 2;
    let forward = lcs_row(a[..mid].iter(), b.iter());
    let mut backward = lcs_row(a[mid..].iter().rev(), b.iter().rev());
    backward.reverse();
    let split = (0..=b.len())
        .max_by_key(|&j| (forward[j] + backward[j], std::cmp::Reverse(j)))
        .unwrap();
    align(&a[..mid], &b[..split], ops);
    align(&a[mid..], &b[split..], ops);
}

/// Last row of the LCS table: `row[j]` = LCS length of `a` and `b[..j]`.
fn lcs_row<'a, 'b>(a: impl Iterator<Item = &'a &'b str>, b: impl Iterator<Item = &'a &'b str> + Clone) -> Vec<usize>
where
    'b: 'a,
{
    let b: Vec<&str> = b.copied().collect();
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev
}

/// Reorders every maximal run of non-equal ops to deletions first.
fn normalize_changes(ops: &mut [DiffKind]) {
    let mut i = 0;
    while i < ops.len() {
        if ops[i] == DiffKind::Equal {
            i += 1;
            continue;
        }
        let start = i;
        while i < ops.len() && ops[i] != DiffKind::Equal {
            i += 1;
        }
        ops[start..i].sort_by_key(|k| *k != DiffKind::Delete);
    }
}

fn segments(ops: &[DiffKind], a: &[&str], b: &[&str]) -> Vec<DiffSegment> {
    let (mut i, mut j) = (0, 0);
    let mut out: Vec<DiffSegment> = Vec::new();
    for &op in ops {
        let token = match op {
            DiffKind::Equal => {
                i += 1;
                j += 1;
                a[i - 1]
            }
            DiffKind::Delete => {
                i += 1;
                a[i - 1]
            }
            DiffKind::Insert => {
                j += 1;
                b[j - 1]
            }
        };
        match out.last_mut() {
            Some(seg) if seg.kind == op => seg.tokens.push(token.to_string()),
            _ => out.push(DiffSegment {
                kind: op,
                tokens: vec![token.to_string()],
            }),
        }
    }
    out
}

/// The original token sequence (equal + delete segments).
pub fn apply_left(diff: &[DiffSegment]) -> Vec<String> {
    collect(diff, DiffKind::Delete)
}

/// The edited token sequence (equal + insert segments).
pub fn apply_right(diff: &[DiffSegment]) -> Vec<String> {
    collect(diff, DiffKind::Insert)
}

fn collect(diff: &[DiffSegment], side: DiffKind) -> Vec<String> {
    diff.iter()
        .filter(|s| s.kind == DiffKind::Equal || s.kind == side)
        .flat_map(|s| s.tokens.iter().cloned())
        .collect()
}
