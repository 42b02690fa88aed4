//! Clarifying questions for ambiguous queries.
//!
//! Each candidate answer is treated as a bag of words. Asking whether the
//! request involves a term splits the candidates into those containing it
//! (`k` of `n`) and the rest. With the yes-probability taken as `k/n`, the
//! expected number of candidates left is `(k² + (n − k)²) / n`; one greedy
//! step picks the term minimizing it.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::featurizer::tokenize;
use crate::stopwords::is_stopword;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClarifyError {
    #[error("candidate set is empty")]
    EmptyCandidates,
    #[error("filter covers {filter_n} candidates but the set has {actual}")]
    FilterMismatch { filter_n: usize, actual: usize },
    #[error("no candidate is consistent with answering {answer:?} to {term:?}")]
    Contradiction { term: String, answer: YesNo },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum YesNo {
    Yes,
    No,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSet {
    ids: Vec<String>,
    bags: Vec<BTreeSet<String>>,
}

/// Content words of a text: tokenizer output minus stopwords.
pub fn bag_of_words(text: &str) -> BTreeSet<String> {
    tokenize(text).into_iter().filter(|t| !is_stopword(t)).collect()
}

impl CandidateSet {
    /// Keeps the given order; duplicate ids are dropped after their first occurrence.
    pub fn new(items: impl IntoIterator<Item = (String, BTreeSet<String>)>) -> Result<Self, ClarifyError> {
        let mut seen = BTreeSet::new();
        let (ids, bags): (Vec<_>, Vec<_>) = items
            .into_iter()
            .filter(|(id, _)| seen.insert(id.clone()))
            .unzip();
        if ids.is_empty() {
            return Err(ClarifyError::EmptyCandidates);
        }
        Ok(Self { ids, bags })
    }

    pub fn from_texts<'a>(items: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self, ClarifyError> {
        Self::new(items.into_iter().map(|(id, text)| (id.to_string(), bag_of_words(text))))
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn bag(&self, i: usize) -> &BTreeSet<String> {
        &self.bags[i]
    }

    pub fn count_containing(&self, term: &str) -> usize {
        self.bags.iter().filter(|b| b.contains(term)).count()
    }

    /// Terms present in at least one and at most `n − 1` candidates, with counts.
    pub fn vocabulary(&self) -> BTreeMap<String, usize> {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for bag in &self.bags {
            for t in bag {
                if !is_stopword(t) {
                    *counts.entry(t.clone()).or_insert(0) += 1;
                }
            }
        }
        let n = self.len();
        counts.retain(|_, k| *k < n);
        counts
    }

    pub fn filter_for(&self, term: &str) -> Filter {
        Filter {
            term: term.to_string(),
            yes_count: self.count_containing(term),
            total: self.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Filter {
    pub term: String,
    pub yes_count: usize,
    pub total: usize,
}

impl Filter {
    /// `k² + (n − k)²`, i.e. `n` times the expected remaining count.
    fn scaled_remaining(&self) -> usize {
        let k = self.yes_count;
        let rest = self.total - k;
        k * k + rest * rest
    }

    pub fn is_balanced(&self) -> bool {
        let half = self.total / 2;
        self.yes_count == half || self.yes_count == self.total - half
    }
}

/// Ambiguity thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AmbiguityConfig {
    /// Candidates scoring at least `near_ratio · top` count as near the top.
    pub near_ratio: f64,
    pub min_near: usize,
    /// Top-two gap below `margin · top` counts as a near tie.
    pub margin: f64,
}

impl Default for AmbiguityConfig {
    fn default() -> Self {
        Self {
            near_ratio: 0.5,
            min_near: 4,
            margin: 0.1,
        }
    }
}

/// `scores` sorted descending.
pub fn is_ambiguous(scores: &[f64]) -> bool {
    is_ambiguous_with(scores, &AmbiguityConfig::default())
}

pub fn is_ambiguous_with(scores: &[f64], cfg: &AmbiguityConfig) -> bool {
    if scores.len() < 2 {
        return false;
    }
    let top = scores[0];
    let near = scores.iter().filter(|s| **s >= cfg.near_ratio * top).count();
    near >= cfg.min_near && (top - scores[1]) < cfg.margin * top
}

pub fn expected_remaining(candidates: &CandidateSet, filter: &Filter) -> Result<f64, ClarifyError> {
    if candidates.is_empty() || filter.total == 0 {
        return Err(ClarifyError::EmptyCandidates);
    }
    if filter.total != candidates.len() || filter.yes_count > filter.total {
        return Err(ClarifyError::FilterMismatch {
            filter_n: filter.total,
            actual: candidates.len(),
        });
    }
    Ok(filter.scaled_remaining() as f64 / filter.total as f64)
}

/// Greedy one-step choice over the candidates' own vocabulary.
pub fn best_filter(candidates: &CandidateSet) -> Option<Filter> {
    let vocab = candidates.vocabulary();
    best_filter_in(candidates, vocab.keys().map(String::as_str))
}

/// Term minimizing expected remaining; ties go to the lexicographically
/// smaller term. Terms that split nothing are skipped.
pub fn best_filter_in<'a>(
    candidates: &CandidateSet,
    vocabulary: impl IntoIterator<Item = &'a str>,
) -> Option<Filter> {
    let n = candidates.len();
    let mut best: Option<Filter> = None;
    for term in vocabulary {
        let f = candidates.filter_for(term);
        if f.yes_count == 0 || f.yes_count == n {
            continue;
        }
        let better = match &best {
            None => true,
            Some(b) => {
                let (s, bs) = (f.scaled_remaining(), b.scaled_remaining());
                s < bs || (s == bs && f.term < b.term)
            }
        };
        if better {
            best = Some(f);
        }
    }
    best
}

pub fn apply_filter(candidates: &CandidateSet, filter: &Filter, answer: YesNo) -> Result<CandidateSet, ClarifyError> {
    let keep_if = answer == YesNo::Yes;
    let kept: Vec<(String, BTreeSet<String>)> = candidates
        .ids
        .iter()
        .zip(&candidates.bags)
        .filter(|(_, bag)| bag.contains(&filter.term) == keep_if)
        .map(|(id, bag)| (id.clone(), bag.clone()))
        .collect();
    if kept.is_empty() {
        return Err(ClarifyError::Contradiction {
            term: filter.term.clone(),
            answer,
        });
    }
    CandidateSet::new(kept)
}

pub fn render_question(filter: &Filter) -> String {
    let escaped = filter.term.replace('\\', "\\\\").replace('\'', "\\'");
    format!("Does your request involve '{escaped}'?")
}
