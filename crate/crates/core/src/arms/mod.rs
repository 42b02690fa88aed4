//! Answer providers ("arms") and the registry the policy chooses from.
//!
//! Local arms (BM25 search, FAQ lookup) are built from in-memory tables at
//! startup. Remote arms speak a small JSON contract over HTTP. An arm that
//! fails for a request is reported as unavailable and masked for that round.

mod corpus;
mod faq;
mod fuzzy;
mod highlight;
mod remote;
mod search;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::featurizer::tokenize;
use crate::model::{ArmDescriptor, ArmId, ArmKind};

pub use corpus::{load_corpus, Corpus, Document};
pub use faq::{faq_arm_answer, load_faq, FaqArm, FaqEntry, FaqMatch, FaqTable, FAQ_MIN_SCORE};
pub use fuzzy::{fuzzy_resolve, trigram_jaccard, FuzzyIndex, DEFAULT_FUZZY_THRESHOLD};
pub use highlight::{highlight_span, sentence_spans};
pub use remote::{remote_arm_answer, RemoteArm, RemoteRequest, RemoteResponse};
pub use search::{bm25_score, Bm25Params, CorpusStats, SearchArm, SearchHit, SearchIndex};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArmError {
    #[error("arm name {0:?} is already registered")]
    DuplicateName(String),
    #[error("arm unavailable: {0}")]
    Unavailable(String),
    #[error("corpus error: {0}")]
    Corpus(String),
}

/// What an arm returns for one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmAnswer {
    pub answer_text: String,
    pub source_doc_ids: Vec<String>,
    pub score: f64,
}

/// Utterance plus its lowercase tokens, shared by all arms for a request.
#[derive(Debug, Clone)]
pub struct ArmQuery {
    pub utterance: String,
    pub tokens: Vec<String>,
}

impl ArmQuery {
    pub fn new(utterance: impl Into<String>) -> Self {
        let utterance = utterance.into();
        let tokens = tokenize(&utterance);
        Self { utterance, tokens }
    }
}

pub trait AnswerProvider: Send + Sync {
    fn kind(&self) -> ArmKind;
    fn answer(&self, query: &ArmQuery) -> Result<ArmAnswer, ArmError>;
}

#[derive(Default)]
pub struct ArmRegistry {
    descriptors: Vec<ArmDescriptor>,
    providers: Vec<Box<dyn AnswerProvider>>,
}

impl ArmRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Ids are handed out densely in registration order.
    pub fn register_arm(
        &mut self,
        name: impl Into<String>,
        provider: Box<dyn AnswerProvider>,
    ) -> Result<ArmId, ArmError> {
        let name = name.into();
        if self.descriptors.iter().any(|d| d.name == name) {
            return Err(ArmError::DuplicateName(name));
        }
        let arm_id = ArmId::from(self.descriptors.len());
        self.descriptors.push(ArmDescriptor {
            arm_id,
            name,
            kind: provider.kind(),
        });
        self.providers.push(provider);
        Ok(arm_id)
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    pub fn descriptors(&self) -> &[ArmDescriptor] {
        &self.descriptors
    }

    pub fn descriptor(&self, arm: ArmId) -> Option<&ArmDescriptor> {
        self.descriptors.get(arm.index())
    }

    pub fn answer(&self, arm: ArmId, query: &ArmQuery) -> Result<ArmAnswer, ArmError> {
        match self.providers.get(arm.index()) {
            Some(p) => p.answer(query),
            None => Err(ArmError::Unavailable(format!("no arm {arm}"))),
        }
    }

    /// Queries every arm concurrently; result `i` belongs to arm `i`.
    pub fn answer_all(&self, query: &ArmQuery) -> Vec<Result<ArmAnswer, ArmError>> {
        std::thread::scope(|scope| {
            let handles: Vec<_> = self
                .providers
                .iter()
                .map(|p| scope.spawn(move || p.answer(query)))
                .collect();
            handles
                .into_iter()
                .map(|h| {
                    h.join()
                        .unwrap_or_else(|_| Err(ArmError::Unavailable("arm panicked".into())))
                })
                .collect()
        })
    }
}
