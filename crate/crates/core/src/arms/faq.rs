//! Hand-curated question/answer table matched by token-set similarity.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::{AnswerProvider, ArmAnswer, ArmError, ArmQuery};
use crate::featurizer::tokenize;
use crate::model::ArmKind;
use crate::stopwords::is_stopword;

/// Scores below this are reported as "no answer" with score 0.
pub const FAQ_MIN_SCORE: f64 = 0.2;

pub const NO_FAQ_ANSWER: &str = "No matching FAQ entry.";

#[derive(Debug, Clone, PartialEq)]
pub struct FaqEntry {
    pub question: String,
    pub answer: String,
    pub key: BTreeSet<String>,
}

impl FaqEntry {
    pub fn new(question: impl Into<String>, answer: impl Into<String>) -> Self {
        let question = question.into();
        let key = content_terms(&tokenize(&question));
        Self {
            question,
            answer: answer.into(),
            key,
        }
    }
}

pub type FaqTable = Vec<FaqEntry>;

fn content_terms(tokens: &[String]) -> BTreeSet<String> {
    tokens.iter().filter(|t| !is_stopword(t)).cloned().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaqMatch {
    /// `|Q ∩ K| / |Q ∪ K|`
    Jaccard,
    /// `|Q ∩ K| / min(|Q|, |K|)`, the keyword-overlap variant.
    Overlap,
}

impl FaqMatch {
    fn score(self, q: &BTreeSet<String>, k: &BTreeSet<String>) -> f64 {
        let inter = q.intersection(k).count() as f64;
        let denom = match self {
            FaqMatch::Jaccard => (q.len() + k.len()) as f64 - inter,
            FaqMatch::Overlap => q.len().min(k.len()) as f64,
        };
        if denom == 0.0 {
            0.0
        } else {
            inter / denom
        }
    }
}

/// Best entry by Jaccard similarity (first entry wins ties).
pub fn faq_arm_answer(query_tokens: &[String], table: &[FaqEntry]) -> ArmAnswer {
    faq_answer_with(query_tokens, table, FaqMatch::Jaccard)
}

fn faq_answer_with(query_tokens: &[String], table: &[FaqEntry], mode: FaqMatch) -> ArmAnswer {
    let q = content_terms(query_tokens);
    let mut best: Option<(f64, &FaqEntry)> = None;
    for e in table {
        let s = mode.score(&q, &e.key);
        if best.is_none_or(|(b, _)| s > b) {
            best = Some((s, e));
        }
    }
    match best {
        Some((score, e)) if score >= FAQ_MIN_SCORE => ArmAnswer {
            answer_text: e.answer.clone(),
            source_doc_ids: vec![e.question.clone()],
            score,
        },
        _ => ArmAnswer {
            answer_text: NO_FAQ_ANSWER.into(),
            source_doc_ids: Vec::new(),
            score: 0.0,
        },
    }
}

#[derive(Deserialize)]
struct JsonFaq {
    question: String,
    answer: String,
}

/// JSONL of `{question, answer}`.
pub fn load_faq(path: &Path) -> Result<FaqTable, ArmError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ArmError::Corpus(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            serde_json::from_str::<JsonFaq>(l)
                .map(|f| FaqEntry::new(f.question, f.answer))
                .map_err(|e| ArmError::Corpus(format!("{} line {}: {e}", path.display(), n + 1)))
        })
        .collect()
}

pub struct FaqArm {
    table: std::sync::Arc<FaqTable>,
    mode: FaqMatch,
}

impl FaqArm {
    pub fn new(table: std::sync::Arc<FaqTable>, mode: FaqMatch) -> Self {
        Self { table, mode }
    }
}

impl AnswerProvider for FaqArm {
    fn kind(&self) -> ArmKind {
        ArmKind::Faq
    }

    fn answer(&self, query: &ArmQuery) -> Result<ArmAnswer, ArmError> {
        if self.table.is_empty() {
            return Err(ArmError::Unavailable("FAQ table is empty".into()));
        }
        Ok(faq_answer_with(&query.tokens, &self.table, self.mode))
    }
}
