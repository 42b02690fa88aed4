//! Domain types shared across the crate.
//!
//! Everything here is an immutable value once constructed; constructors
//! enforce the invariants so downstream code can rely on them.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("stars must be in 1..=5, got {0}")]
    StarsOutOfRange(i64),
    #[error("utterance is empty")]
    EmptyUtterance,
    #[error("session id is empty")]
    EmptySessionId,
    #[error("feature dimension must be positive")]
    ZeroDimension,
    #[error("feature index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: u32, dim: u32 },
    #[error("feature value at index {0} is not finite")]
    NonFinite(u32),
    #[error("feature index/value arrays differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("feature indices must be strictly increasing")]
    UnsortedIndices,
    #[error("propensity must be in (0, 1], got {0}")]
    Propensity(f64),
    #[error("reward must be in [0, 1], got {0}")]
    Reward(f64),
    #[error("highlight span {start}..{end} is invalid for text of {len} chars")]
    Span { start: usize, end: usize, len: usize },
}

/// Maps a 1-5 star rating onto `[0, 1]` as `(stars - 1) / 4`.
pub fn normalize_stars(stars: i64) -> Result<f64, ModelError> {
    if !(1..=5).contains(&stars) {
        return Err(ModelError::StarsOutOfRange(stars));
    }
    Ok((stars - 1) as f64 / 4.0)
}

/// Dense arm index in `0..K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArmId(pub u32);

impl ArmId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for ArmId {
    fn from(i: usize) -> Self {
        ArmId(i as u32)
    }
}

impl fmt::Display for ArmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmKind {
    Search,
    Faq,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmDescriptor {
    pub arm_id: ArmId,
    pub name: String,
    pub kind: ArmKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub session_id: String,
    pub utterance: String,
    pub timestamp: u64,
}

impl Query {
    pub fn new(
        session_id: impl Into<String>,
        utterance: impl Into<String>,
        timestamp: u64,
    ) -> Result<Self, ModelError> {
        let session_id = session_id.into();
        let utterance = utterance.into();
        if session_id.is_empty() {
            return Err(ModelError::EmptySessionId);
        }
        if utterance.trim().is_empty() {
            return Err(ModelError::EmptyUtterance);
        }
        Ok(Self {
            session_id,
            utterance,
            timestamp,
        })
    }
}

pub const DEFAULT_HISTORY_WINDOW: usize = 6;

/// Prior utterances of one chat, oldest first, bounded by `window`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub session_id: String,
    history: VecDeque<String>,
    window: usize,
}

impl Session {
    pub fn new(session_id: impl Into<String>) -> Self {
        Self::with_window(session_id, DEFAULT_HISTORY_WINDOW)
    }

    pub fn with_window(session_id: impl Into<String>, window: usize) -> Self {
        Self {
            session_id: session_id.into(),
            history: VecDeque::with_capacity(window),
            window,
        }
    }

    pub fn push(&mut self, utterance: impl Into<String>) {
        if self.window == 0 {
            return;
        }
        if self.history.len() == self.window {
            self.history.pop_front();
        }
        self.history.push_back(utterance.into());
    }

    /// Most recent utterance first.
    pub fn recent(&self) -> impl Iterator<Item = &str> {
        self.history.iter().rev().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }
}

/// Sparse vector in `R^dim` with strictly increasing indices and no stored zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFeatureVector", into = "RawFeatureVector")]
pub struct FeatureVector {
    dim: u32,
    indices: Vec<u32>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawFeatureVector {
    dim: u32,
    idx: Vec<u32>,
    val: Vec<f64>,
}

impl TryFrom<RawFeatureVector> for FeatureVector {
    type Error = ModelError;

    fn try_from(raw: RawFeatureVector) -> Result<Self, Self::Error> {
        FeatureVector::from_sorted(raw.dim, raw.idx, raw.val)
    }
}

impl From<FeatureVector> for RawFeatureVector {
    fn from(v: FeatureVector) -> Self {
        RawFeatureVector {
            dim: v.dim,
            idx: v.indices,
            val: v.values,
        }
    }
}

impl FeatureVector {
    pub fn zeros(dim: u32) -> Result<Self, ModelError> {
        if dim == 0 {
            return Err(ModelError::ZeroDimension);
        }
        Ok(Self {
            dim,
            indices: Vec::new(),
            values: Vec::new(),
        })
    }

    /// Builds from already sorted, validated parts.
    pub fn from_sorted(dim: u32, indices: Vec<u32>, values: Vec<f64>) -> Result<Self, ModelError> {
        if dim == 0 {
            return Err(ModelError::ZeroDimension);
        }
        if indices.len() != values.len() {
            return Err(ModelError::LengthMismatch(indices.len(), values.len()));
        }
        for w in indices.windows(2) {
            if w[0] >= w[1] {
                return Err(ModelError::UnsortedIndices);
            }
        }
        for (&i, &v) in indices.iter().zip(&values) {
            if i >= dim {
                return Err(ModelError::IndexOutOfRange { index: i, dim });
            }
            if !v.is_finite() {
                return Err(ModelError::NonFinite(i));
            }
        }
        let mut out = Self {
            dim,
            indices,
            values,
        };
        out.drop_zeros();
        Ok(out)
    }

    /// Sums duplicate indices; entries that cancel to zero are dropped.
    pub fn from_pairs(
        dim: u32,
        pairs: impl IntoIterator<Item = (u32, f64)>,
    ) -> Result<Self, ModelError> {
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        for (i, v) in pairs {
            if i >= dim {
                return Err(ModelError::IndexOutOfRange { index: i, dim });
            }
            if !v.is_finite() {
                return Err(ModelError::NonFinite(i));
            }
            *acc.entry(i).or_insert(0.0) += v;
        }
        let (indices, values) = acc.into_iter().unzip();
        Self::from_sorted(dim, indices, values)
    }

    pub fn from_dense(values: &[f64]) -> Result<Self, ModelError> {
        let dim = values.len() as u32;
        Self::from_pairs(
            dim,
            values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, &v)| (i as u32, v)),
        )
    }

    fn drop_zeros(&mut self) {
        if self.values.iter().all(|v| *v != 0.0) {
            return;
        }
        let (i, v): (Vec<u32>, Vec<f64>) = self
            .indices
            .iter()
            .zip(&self.values)
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (*i, *v))
            .unzip();
        self.indices = i;
        self.values = v;
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_zero(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn get(&self, index: u32) -> f64 {
        match self.indices.binary_search(&index) {
            Ok(pos) => self.values[pos],
            Err(_) => 0.0,
        }
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Unit-L2 copy; the zero vector is returned unchanged.
    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            return self.clone();
        }
        let mut out = self.clone();
        for v in &mut out.values {
            *v /= n;
        }
        out.drop_zeros();
        out
    }

    /// `self + scale * other`; dimensions must agree.
    pub fn add_scaled(&self, other: &FeatureVector, scale: f64) -> Result<Self, ModelError> {
        if other.dim != self.dim {
            return Err(ModelError::IndexOutOfRange {
                index: other.dim,
                dim: self.dim,
            });
        }
        Self::from_pairs(
            self.dim,
            self.iter().chain(other.iter().map(|(i, v)| (i, v * scale))),
        )
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim as usize];
        for (i, v) in self.iter() {
            out[i as usize] = v;
        }
        out
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * dense[i as usize]).sum()
    }
}

/// Half-open span `[start, end)` in Unicode scalar values (chars) of a text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub suggestion_id: String,
    pub arm_id: ArmId,
    pub answer_text: String,
    pub highlights: Vec<Span>,
    pub propensity: f64,
    pub clarifying_question: Option<String>,
}

impl Suggestion {
    pub fn validate(&self) -> Result<(), ModelError> {
        check_propensity(self.propensity)?;
        let len = self.answer_text.chars().count();
        let mut prev_end = 0;
        for s in &self.highlights {
            if s.start >= s.end || s.end > len || s.start < prev_end {
                return Err(ModelError::Span {
                    start: s.start,
                    end: s.end,
                    len,
                });
            }
            prev_end = s.end;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackEvent {
    pub suggestion_id: String,
    pub stars: u8,
    pub received_at: u64,
}

impl FeedbackEvent {
    pub fn new(suggestion_id: impl Into<String>, stars: i64, received_at: u64) -> Result<Self, ModelError> {
        normalize_stars(stars)?;
        Ok(Self {
            suggestion_id: suggestion_id.into(),
            stars: stars as u8,
            received_at,
        })
    }

    pub fn reward(&self) -> f64 {
        (self.stars as f64 - 1.0) / 4.0
    }
}

/// One logged decision. Field order is the on-disk JSONL order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub ordinal: u64,
    pub ts: u64,
    pub session_id: String,
    pub context: FeatureVector,
    pub arm_id: ArmId,
    pub propensity: f64,
    pub reward: Option<f64>,
    pub policy_name: String,
    pub stars: Option<u8>,
    pub seed_state_digest: Option<String>,
}

impl InteractionRecord {
    pub fn validate(&self) -> Result<(), ModelError> {
        check_propensity(self.propensity)?;
        if let Some(r) = self.reward {
            if !(0.0..=1.0).contains(&r) {
                return Err(ModelError::Reward(r));
            }
        }
        if let Some(s) = self.stars {
            normalize_stars(s as i64)?;
        }
        Ok(())
    }
}

pub(crate) fn check_propensity(p: f64) -> Result<(), ModelError> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(ModelError::Propensity(p))
    }
}
