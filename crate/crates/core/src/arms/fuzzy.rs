//! Spelling-tolerant term lookup by character-trigram Jaccard similarity.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::featurizer::char_ngrams;

pub const DEFAULT_FUZZY_THRESHOLD: f64 = 0.4;

fn trigrams(token: &str) -> BTreeSet<String> {
    char_ngrams(token, 3)
}

fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn trigram_jaccard(a: &str, b: &str) -> f64 {
    jaccard(&trigrams(a), &trigrams(b))
}

/// Exact member, else the most trigram-similar term at or above `threshold`.
/// Equal similarities resolve to the lexicographically smallest term.
pub fn fuzzy_resolve<'v>(
    token: &str,
    vocabulary: impl IntoIterator<Item = &'v str>,
    threshold: f64,
) -> Option<&'v str> {
    let grams = trigrams(token);
    let mut best: Option<(f64, &'v str)> = None;
    for term in vocabulary {
        if term == token {
            return Some(term);
        }
        let sim = jaccard(&grams, &trigrams(term));
        if sim < threshold {
            continue;
        }
        best = match best {
            Some((s, t)) if s > sim || (s == sim && t <= term) => Some((s, t)),
            _ => Some((sim, term)),
        };
    }
    best.map(|(_, t)| t)
}

/// Trigram postings over a fixed vocabulary; same answers as [`fuzzy_resolve`]
/// but only touches terms sharing at least one trigram with the probe.
#[derive(Debug, Clone, Default)]
pub struct FuzzyIndex {
    terms: Vec<String>,
    gram_counts: Vec<usize>,
    postings: HashMap<String, Vec<u32>>,
    exact: HashMap<String, u32>,
    threshold: f64,
}

impl FuzzyIndex {
    pub fn new<'a>(vocabulary: impl IntoIterator<Item = &'a str>, threshold: f64) -> Self {
        let terms: BTreeSet<&str> = vocabulary.into_iter().collect();
        let mut out = FuzzyIndex {
            threshold,
            ..Default::default()
        };
        for (i, term) in terms.into_iter().enumerate() {
            let grams = trigrams(term);
            out.gram_counts.push(grams.len());
            for g in grams {
                out.postings.entry(g).or_default().push(i as u32);
            }
            out.exact.insert(term.to_string(), i as u32);
            out.terms.push(term.to_string());
        }
        out
    }

    pub fn contains(&self, term: &str) -> bool {
        self.exact.contains_key(term)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn resolve(&self, token: &str) -> Option<&str> {
        if let Some(&i) = self.exact.get(token) {
            return Some(&self.terms[i as usize]);
        }
        let grams = trigrams(token);
        let mut shared: BTreeMap<u32, usize> = BTreeMap::new();
        for g in &grams {
            if let Some(ids) = self.postings.get(g) {
                for &i in ids {
                    *shared.entry(i).or_insert(0) += 1;
                }
            }
        }
        // Terms are stored sorted, so ascending id order is lexicographic order.
        let mut best: Option<(f64, u32)> = None;
        for (i, inter) in shared {
            let union = grams.len() + self.gram_counts[i as usize] - inter;
            let sim = inter as f64 / union as f64;
            if sim >= self.threshold && best.is_none_or(|(s, _)| sim > s) {
                best = Some((sim, i));
            }
        }
        best.map(|(_, i)| self.terms[i as usize].as_str())
    }
}
