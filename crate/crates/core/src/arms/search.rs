//! Okapi BM25 over an in-memory inverted index, with per-token fuzzy
//! resolution against the corpus vocabulary.
//!
//! `idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5))`, which stays positive for
//! every document frequency.

use std::collections::{BTreeSet, HashMap};

use super::corpus::{Corpus, Document};
use super::fuzzy::{FuzzyIndex, DEFAULT_FUZZY_THRESHOLD};
use super::highlight::best_sentence;
use super::{AnswerProvider, ArmAnswer, ArmError, ArmQuery};
use crate::model::ArmKind;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CorpusStats {
    pub n_docs: usize,
    pub avg_doc_len: f64,
    pub doc_freq: HashMap<String, u32>,
}

impl CorpusStats {
    pub fn from_corpus(corpus: &Corpus) -> Self {
        let mut doc_freq = HashMap::new();
        let mut total = 0usize;
        for d in corpus.docs() {
            total += d.len();
            for t in d.term_counts().keys() {
                *doc_freq.entry(t.clone()).or_insert(0) += 1;
            }
        }
        let n_docs = corpus.len();
        Self {
            n_docs,
            avg_doc_len: if n_docs == 0 { 0.0 } else { total as f64 / n_docs as f64 },
            doc_freq,
        }
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.n_docs as f64;
        let df = self.doc_freq.get(term).copied().unwrap_or(0) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }
}

fn term_weight(idf: f64, tf: f64, doc_len: f64, avg_len: f64, p: Bm25Params) -> f64 {
    let norm = if avg_len > 0.0 { doc_len / avg_len } else { 1.0 };
    idf * (tf * (p.k1 + 1.0)) / (tf + p.k1 * (1.0 - p.b + p.b * norm))
}

/// BM25 of one document; each distinct query term counts once.
pub fn bm25_score(query_terms: &[String], doc: &Document, stats: &CorpusStats, params: Bm25Params) -> f64 {
    let distinct: BTreeSet<&str> = query_terms.iter().map(String::as_str).collect();
    distinct
        .into_iter()
        .map(|t| {
            let tf = doc.term_frequency(t);
            if tf == 0 {
                0.0
            } else {
                term_weight(stats.idf(t), tf as f64, doc.len() as f64, stats.avg_doc_len, params)
            }
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchHit {
    pub doc_index: usize,
    pub doc_id: String,
    pub score: f64,
}

pub struct SearchIndex {
    corpus: Corpus,
    stats: CorpusStats,
    postings: HashMap<String, Vec<(u32, u32)>>,
    fuzzy: FuzzyIndex,
    params: Bm25Params,
}

impl SearchIndex {
    pub fn new(corpus: Corpus) -> Self {
        Self::with_params(corpus, Bm25Params::default(), DEFAULT_FUZZY_THRESHOLD)
    }

    pub fn with_params(corpus: Corpus, params: Bm25Params, fuzzy_threshold: f64) -> Self {
        let stats = CorpusStats::from_corpus(&corpus);
        let mut postings: HashMap<String, Vec<(u32, u32)>> = HashMap::new();
        for (i, d) in corpus.docs().iter().enumerate() {
            for (t, &tf) in d.term_counts() {
                postings.entry(t.clone()).or_default().push((i as u32, tf));
            }
        }
        let fuzzy = FuzzyIndex::new(postings.keys().map(String::as_str), fuzzy_threshold);
        Self {
            corpus,
            stats,
            postings,
            fuzzy,
            params,
        }
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn stats(&self) -> &CorpusStats {
        &self.stats
    }

    /// Maps each query token to a vocabulary term (exact or fuzzy), dropping misses.
    pub fn resolve_terms(&self, tokens: &[String]) -> Vec<String> {
        let mut seen = BTreeSet::new();
        tokens
            .iter()
            .filter_map(|t| self.fuzzy.resolve(t))
            .filter(|t| seen.insert(t.to_string()))
            .map(str::to_string)
            .collect()
    }

    /// Documents with positive score, ordered by score desc then `doc_id` asc.
    pub fn search(&self, tokens: &[String], limit: usize) -> Vec<SearchHit> {
        let terms = self.resolve_terms(tokens);
        let mut scores: HashMap<u32, f64> = HashMap::new();
        for t in &terms {
            let Some(list) = self.postings.get(t) else {
                continue;
            };
            let idf = self.stats.idf(t);
            for &(doc, tf) in list {
                let len = self.corpus.docs()[doc as usize].len() as f64;
                *scores.entry(doc).or_insert(0.0) +=
                    term_weight(idf, tf as f64, len, self.stats.avg_doc_len, self.params);
            }
        }
        let mut hits: Vec<SearchHit> = scores
            .into_iter()
            .filter(|(_, s)| *s > 0.0)
            .map(|(doc, score)| SearchHit {
                doc_index: doc as usize,
                doc_id: self.corpus.docs()[doc as usize].doc_id.clone(),
                score,
            })
            .collect();
        // Doc indices follow doc_id order, so the index is the tie-break.
        hits.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.doc_index.cmp(&b.doc_index)));
        hits.truncate(limit);
        hits
    }

    /// Top-k titles followed by the best-matching sentence of the top document.
    pub fn answer(&self, query: &ArmQuery, top_k: usize) -> Result<ArmAnswer, ArmError> {
        if self.corpus.is_empty() {
            return Err(ArmError::Unavailable("search corpus is empty".into()));
        }
        let hits = self.search(&query.tokens, top_k.max(1));
        let Some(top) = hits.first() else {
            return Ok(ArmAnswer {
                answer_text: "No matching documents found.".into(),
                source_doc_ids: Vec::new(),
                score: 0.0,
            });
        };
        let mut text = String::new();
        for (rank, h) in hits.iter().enumerate() {
            let doc = &self.corpus.docs()[h.doc_index];
            text.push_str(&format!("{}. {}\n", rank + 1, doc.title));
        }
        let top_doc = &self.corpus.docs()[top.doc_index];
        text.push('\n');
        text.push_str(best_sentence(&query.tokens, &top_doc.body));
        Ok(ArmAnswer {
            answer_text: text,
            source_doc_ids: hits.iter().map(|h| h.doc_id.clone()).collect(),
            score: top.score,
        })
    }
}

/// The "search" arm: BM25 top-k over the knowledge base.
pub struct SearchArm {
    index: std::sync::Arc<SearchIndex>,
    top_k: usize,
}

impl SearchArm {
    pub fn new(index: std::sync::Arc<SearchIndex>, top_k: usize) -> Self {
        Self { index, top_k }
    }
}

impl AnswerProvider for SearchArm {
    fn kind(&self) -> ArmKind {
        ArmKind::Search
    }

    fn answer(&self, query: &ArmQuery) -> Result<ArmAnswer, ArmError> {
        self.index.answer(query, self.top_k)
    }
}
