//! Text to context-vector pipeline.
//!
//! Tokens and their contiguous n-grams are hashed with 64-bit FNV-1a into a
//! power-of-two number of buckets. Bit 63 of the hash picks the sign, which
//! keeps collisions unbiased in expectation. The history of a session is
//! folded in with exponentially decaying weights.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{FeatureVector, Query, Session};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeaturizerError {
    #[error("dimension must be a power of two, got {0}")]
    Dimension(u32),
    #[error("history decay must be in [0, 1), got {0}")]
    Decay(f64),
    #[error("ngram_max must be at least 1")]
    NgramMax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeaturizerConfig {
    pub dimension: u32,
    pub ngram_max: usize,
    pub history_decay: f64,
    pub lowercase: bool,
}

impl Default for FeaturizerConfig {
    fn default() -> Self {
        Self {
            dimension: 1 << 18,
            ngram_max: 2,
            history_decay: 0.5,
            lowercase: true,
        }
    }
}

impl FeaturizerConfig {
    pub fn validate(&self) -> Result<(), FeaturizerError> {
        if !self.dimension.is_power_of_two() {
            return Err(FeaturizerError::Dimension(self.dimension));
        }
        if !(0.0..1.0).contains(&self.history_decay) {
            return Err(FeaturizerError::Decay(self.history_decay));
        }
        if self.ngram_max == 0 {
            return Err(FeaturizerError::NgramMax);
        }
        Ok(())
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME)
    })
}

/// Lowercases and splits on every non-alphanumeric char.
pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_with(text, true)
}

pub fn tokenize_with(text: &str, lowercase: bool) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| if lowercase { t.to_lowercase() } else { t.to_string() })
        .collect()
}

/// Distinct contiguous character n-grams; tokens shorter than `n` map to themselves.
pub fn char_ngrams(token: &str, n: usize) -> BTreeSet<String> {
    let chars: Vec<char> = token.chars().collect();
    if chars.len() < n || n == 0 {
        return BTreeSet::from([token.to_string()]);
    }
    chars.windows(n).map(|w| w.iter().collect()).collect()
}

/// Hashes unigrams and word n-grams (joined by a single space) into a unit vector.
pub fn hash_features(tokens: &[String], config: &FeaturizerConfig) -> FeatureVector {
    let dim = config.dimension;
    let mask = u64::from(dim) - 1;
    let mut pairs = Vec::new();
    for n in 1..=config.ngram_max.max(1) {
        for gram in tokens.windows(n) {
            let feature = gram.join(" ");
            let h = fnv1a64(feature.as_bytes());
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            pairs.push(((h & mask) as u32, sign));
        }
    }
    FeatureVector::from_pairs(dim, pairs)
        .expect("hashed indices are below dimension")
        .normalized()
}

/// Query vector plus decayed history vectors, renormalized.
///
/// The most recent prior utterance gets weight `decay`, the one before it
/// `decay^2`, and so on.
pub fn build_context(query: &Query, session: &Session, config: &FeaturizerConfig) -> FeatureVector {
    build_context_from_text(&query.utterance, session.recent(), config)
}

pub fn build_context_from_text<'a>(
    utterance: &str,
    recent_history: impl Iterator<Item = &'a str>,
    config: &FeaturizerConfig,
) -> FeatureVector {
    let mut acc = hash_features(&tokenize_with(utterance, config.lowercase), config);
    if config.history_decay == 0.0 {
        return acc;
    }
    let mut weight = 1.0;
    for past in recent_history {
        weight *= config.history_decay;
        let v = hash_features(&tokenize_with(past, config.lowercase), config);
        acc = acc.add_scaled(&v, weight).expect("same dimension");
    }
    acc.normalized()
}
