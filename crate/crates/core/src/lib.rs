//! Contextual-bandit routing of customer questions to answer providers.
//!
//! One provider ("arm") is chosen per question from a hashed context of the
//! question and its recent chat history. A human agent rates the surfaced
//! answer on a 1-5 star scale and the rating updates the policy online.
//! Ambiguous questions get a clarifying question picked greedily to shrink
//! the set of candidate answers.
//!
//! Module map:
//! - [`model`]: shared domain types and star normalization.
//! - [`featurizer`]: tokenizer and hashing-trick context vectors.
//! - [`arms`]: arm registry, BM25 search, FAQ matching, remote adapter, highlighting.
//! - [`policy`]: uniform, epsilon-greedy, LinUCB and linear Thompson policies.
//! - [`clarifier`]: ambiguity detection and greedy filter selection.
//! - [`evaluation`]: JSONL interaction log, replay, IPS/SNIPS estimators.
//! - [`simulator`]: synthetic environment and regret curves.

pub mod arms;
pub mod clarifier;
pub mod evaluation;
pub mod featurizer;
pub mod model;
pub mod policy;
pub mod simulator;
pub mod stopwords;

pub use model::{
    normalize_stars, ArmDescriptor, ArmId, ArmKind, FeatureVector, FeedbackEvent,
    InteractionRecord, ModelError, Query, Session, Suggestion,
};
