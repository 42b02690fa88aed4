//! The suggest → rate → update loop behind the HTTP handlers.
//!
//! Reads (`suggest`, `stats`) take the policy read lock. Every policy update
//! and every log append goes through the `writer` mutex, which is always
//! taken before the policy write lock. Suggestions wait in a pending table
//! until rated or expired; only then is their record appended to the log.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use deskbandit::arms::{
    highlight_span, load_corpus, load_faq, ArmQuery, ArmRegistry, FaqArm, FaqMatch, RemoteArm, SearchArm, SearchIndex,
};
use deskbandit::clarifier::{
    apply_filter, bag_of_words, best_filter, is_ambiguous_with, render_question, CandidateSet, ClarifyError, Filter,
    YesNo,
};
use deskbandit::evaluation::{read_log, InteractionLog, RecordSink};
use deskbandit::featurizer::build_context_from_text;
use deskbandit::model::Span;
use deskbandit::policy::Policy;
use deskbandit::{normalize_stars, ArmDescriptor, ArmId, InteractionRecord, Session};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ServiceConfig;
use crate::ServiceError;

pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

/// Clock advanced by hand, for TTL tests.
#[derive(Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn new(start_ms: u64) -> Self {
        Self(AtomicU64::new(start_ms))
    }

    pub fn advance(&self, ms: u64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct SuggestRequest {
    pub session_id: String,
    pub utterance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestResponse {
    pub suggestion_id: String,
    pub arm_id: ArmId,
    pub arm_name: String,
    pub answer_text: String,
    pub highlights: Vec<Span>,
    pub propensity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clarifying_question: Option<String>,
    /// Term to send back with the clarifying answer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clarifying_term: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct FeedbackRequest {
    pub suggestion_id: String,
    pub stars: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackResponse {
    pub ok: bool,
    pub updated: bool,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ClarifyRequest {
    pub session_id: String,
    pub term: String,
    pub answer: YesNo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedDoc {
    pub doc_id: String,
    pub title: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClarifyResponse {
    pub remaining_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next_question: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next_term: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolved_answer: Option<Vec<ResolvedDoc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsResponse {
    /// Rated suggestions applied to the policy.
    pub rounds: u64,
    /// Indexed by arm id.
    pub pulls: Vec<u64>,
    pub mean_stars: Option<f64>,
    pub mean_stars_per_arm: Vec<Option<f64>>,
    pub pending: usize,
    pub policy_name: String,
    pub uptime_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmsResponse {
    pub arms: Vec<ArmDescriptor>,
}

struct Pending {
    record: InteractionRecord,
    created_ms: u64,
}

struct Writer {
    log: InteractionLog,
    pending: HashMap<String, Pending>,
    /// Rated suggestion ids with the time they were rated.
    rated: HashMap<String, u64>,
    star_sum: Vec<u64>,
    star_count: Vec<u64>,
}

struct Clarification {
    candidates: CandidateSet,
    filter: Filter,
}

struct SessionState {
    history: Session,
    clarification: Option<Clarification>,
    last_seen_ms: u64,
}

pub struct Desk {
    config: ServiceConfig,
    registry: ArmRegistry,
    search: Arc<SearchIndex>,
    policy: RwLock<Policy>,
    writer: Mutex<Writer>,
    sessions: Mutex<HashMap<String, SessionState>>,
    clock: Arc<dyn Clock>,
    started: Instant,
    draws: AtomicU64,
}

fn internal(e: impl std::fmt::Display) -> ServiceError {
    ServiceError::Internal(e.to_string())
}

fn build_registry(config: &ServiceConfig, search: &Arc<SearchIndex>) -> Result<ArmRegistry, ServiceError> {
    let faq = Arc::new(load_faq(&config.faq_path).map_err(|e| ServiceError::Config(e.to_string()))?);
    let mut reg = ArmRegistry::new();
    let cfg_err = |e: deskbandit::arms::ArmError| ServiceError::Config(e.to_string());
    reg.register_arm("search", Box::new(SearchArm::new(search.clone(), config.search_top_k)))
        .map_err(cfg_err)?;
    reg.register_arm("faq", Box::new(FaqArm::new(faq.clone(), FaqMatch::Jaccard)))
        .map_err(cfg_err)?;
    reg.register_arm("faq-overlap", Box::new(FaqArm::new(faq, FaqMatch::Overlap)))
        .map_err(cfg_err)?;
    for r in &config.remote_arms {
        reg.register_arm(r.name.clone(), Box::new(RemoteArm::new(r.endpoint.clone(), r.timeout_ms)))
            .map_err(cfg_err)?;
    }
    Ok(reg)
}

impl Desk {
    pub fn open(config: ServiceConfig) -> Result<Self, ServiceError> {
        Self::with_clock(config, Arc::new(SystemClock))
    }

    /// Loads tables, restores the snapshot if present (otherwise rebuilds the
    /// ridge state from the rated records of an existing log) and opens the log.
    pub fn with_clock(config: ServiceConfig, clock: Arc<dyn Clock>) -> Result<Self, ServiceError> {
        let corpus = load_corpus(&config.corpus_path).map_err(|e| ServiceError::Config(e.to_string()))?;
        let search = Arc::new(SearchIndex::new(corpus));
        let registry = build_registry(&config, &search)?;
        let k = registry.len();
        let d = config.featurizer.dimension as usize;

        let history = if config.log_path.exists() {
            read_log(&config.log_path).map_err(|e| ServiceError::Config(e.to_string()))?
        } else {
            Vec::new()
        };
        let policy = if config.snapshot_path.exists() {
            let bytes = std::fs::read(&config.snapshot_path).map_err(internal)?;
            let p = Policy::restore(&bytes).map_err(|e| ServiceError::Config(e.to_string()))?;
            if p.dim() != d || p.n_arms() != k {
                return Err(ServiceError::Config(format!(
                    "snapshot has d={} K={}, configuration needs d={d} K={k}",
                    p.dim(),
                    p.n_arms()
                )));
            }
            p
        } else {
            let mut p = Policy::new(config.policy.clone(), d, k, config.seed).map_err(internal)?;
            for rec in history.iter().filter(|r| r.reward.is_some()) {
                p.update(&rec.context, rec.arm_id, rec.propensity, rec.reward)
                    .map_err(|e| ServiceError::Config(format!("log record {}: {e}", rec.ordinal)))?;
            }
            p
        };
        let mut star_sum = vec![0u64; k];
        let mut star_count = vec![0u64; k];
        for rec in &history {
            if let (Some(s), true) = (rec.stars, rec.arm_id.index() < k) {
                star_sum[rec.arm_id.index()] += s as u64;
                star_count[rec.arm_id.index()] += 1;
            }
        }
        let log = InteractionLog::open(&config.log_path).map_err(|e| ServiceError::Config(e.to_string()))?;
        let draws = AtomicU64::new(log.len());
        Ok(Self {
            config,
            registry,
            search,
            policy: RwLock::new(policy),
            writer: Mutex::new(Writer {
                log,
                pending: HashMap::new(),
                rated: HashMap::new(),
                star_sum,
                star_count,
            }),
            sessions: Mutex::new(HashMap::new()),
            clock,
            started: Instant::now(),
            draws,
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn arms(&self) -> ArmsResponse {
        ArmsResponse {
            arms: self.registry.descriptors().to_vec(),
        }
    }

    pub fn policy_snapshot(&self) -> Vec<u8> {
        self.policy.read().expect("policy lock").snapshot()
    }

    /// Finalizes pending suggestions older than the TTL as unrated records.
    fn sweep(&self, w: &mut Writer, now: u64) -> Result<(), ServiceError> {
        let ttl = self.config.feedback_ttl_ms;
        let mut expired: Vec<(u64, String)> = w
            .pending
            .iter()
            .filter(|(_, p)| now.saturating_sub(p.created_ms) >= ttl)
            .map(|(id, p)| (p.created_ms, id.clone()))
            .collect();
        expired.sort();
        for (_, id) in expired {
            let p = w.pending.remove(&id).expect("listed above");
            w.log.append(p.record).map_err(|e| ServiceError::Unavailable(e.to_string()))?;
        }
        w.rated.retain(|_, at| now.saturating_sub(*at) < ttl);
        Ok(())
    }

    pub fn suggest(&self, req: &SuggestRequest) -> Result<SuggestResponse, ServiceError> {
        if req.utterance.trim().is_empty() {
            return Err(ServiceError::Unprocessable("utterance must be non-empty".into()));
        }
        if req.session_id.trim().is_empty() {
            return Err(ServiceError::Unprocessable("session_id must be non-empty".into()));
        }
        let now = self.clock.now_ms();
        let history: Vec<String> = {
            let sessions = self.sessions.lock().expect("sessions lock");
            sessions
                .get(&req.session_id)
                .map(|s| s.history.recent().map(str::to_string).collect())
                .unwrap_or_default()
        };
        let x = build_context_from_text(&req.utterance, history.iter().map(String::as_str), &self.config.featurizer);
        let query = ArmQuery::new(req.utterance.clone());
        let answers = self.registry.answer_all(&query);
        let available: Vec<ArmId> = answers
            .iter()
            .enumerate()
            .filter(|(_, a)| a.is_ok())
            .map(|(i, _)| ArmId::from(i))
            .collect();
        if available.is_empty() {
            return Err(ServiceError::Unavailable("no arm is available".into()));
        }

        let draw = self.draws.fetch_add(1, Ordering::SeqCst);
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(draw);
        let (decision, policy_name) = {
            let policy = self.policy.read().expect("policy lock");
            let d = policy.choose_with(&x, &available, &mut rng).map_err(internal)?;
            (d, policy.name().to_string())
        };
        let suggestion_id = format!("{:016x}{:016x}", rng.random::<u64>(), draw);
        let answer = answers[decision.arm.index()].clone().map_err(internal)?;
        let highlights = highlight_span(&query.tokens, &answer.answer_text);
        let arm_name = self
            .registry
            .descriptor(decision.arm)
            .map(|d| d.name.clone())
            .unwrap_or_default();

        let clarification = self.clarification_for(&query.tokens);
        let (clarifying_question, clarifying_term) = match &clarification {
            Some(c) => (Some(render_question(&c.filter)), Some(c.filter.term.clone())),
            None => (None, None),
        };

        let record = InteractionRecord {
            ordinal: 0,
            ts: now,
            session_id: req.session_id.clone(),
            context: x,
            arm_id: decision.arm,
            propensity: decision.propensity,
            reward: None,
            policy_name,
            stars: None,
            seed_state_digest: Some(format!("{:016x}:{draw}", self.config.seed)),
        };
        {
            let mut w = self.writer.lock().expect("writer lock");
            self.sweep(&mut w, now)?;
            w.pending.insert(
                suggestion_id.clone(),
                Pending {
                    record,
                    created_ms: now,
                },
            );
        }
        {
            let mut sessions = self.sessions.lock().expect("sessions lock");
            let ttl = self.config.feedback_ttl_ms;
            sessions.retain(|_, s| now.saturating_sub(s.last_seen_ms) < ttl);
            let state = sessions.entry(req.session_id.clone()).or_insert_with(|| SessionState {
                history: Session::new(req.session_id.clone()),
                clarification: None,
                last_seen_ms: now,
            });
            state.history.push(req.utterance.clone());
            state.clarification = clarification;
            state.last_seen_ms = now;
        }
        Ok(SuggestResponse {
            suggestion_id,
            arm_id: decision.arm,
            arm_name,
            answer_text: answer.answer_text,
            highlights,
            propensity: decision.propensity,
            clarifying_question,
            clarifying_term,
        })
    }

    fn clarification_for(&self, tokens: &[String]) -> Option<Clarification> {
        let settings = &self.config.clarifier;
        let hits = self.search.search(tokens, settings.top_candidates);
        let scores: Vec<f64> = hits.iter().map(|h| h.score).collect();
        if !is_ambiguous_with(&scores, &settings.ambiguity()) {
            return None;
        }
        let docs = self.search.corpus().docs();
        let candidates = CandidateSet::new(hits.iter().map(|h| {
            let d = &docs[h.doc_index];
            (d.doc_id.clone(), bag_of_words(&format!("{} {}", d.title, d.body)))
        }))
        .ok()?;
        let filter = best_filter(&candidates)?;
        Some(Clarification { candidates, filter })
    }

    pub fn feedback(&self, req: &FeedbackRequest) -> Result<FeedbackResponse, ServiceError> {
        let reward = normalize_stars(req.stars).map_err(|e| ServiceError::Unprocessable(e.to_string()))?;
        let now = self.clock.now_ms();
        let mut w = self.writer.lock().expect("writer lock");
        self.sweep(&mut w, now)?;
        if w.rated.contains_key(&req.suggestion_id) {
            return Ok(FeedbackResponse { ok: true, updated: false });
        }
        let Some(p) = w.pending.remove(&req.suggestion_id) else {
            return Err(ServiceError::NotFound(format!(
                "suggestion {} is unknown or expired",
                req.suggestion_id
            )));
        };
        let mut record = p.record.clone();
        record.reward = Some(reward);
        record.stars = Some(req.stars as u8);
        if let Err(e) = w.log.append(record.clone()) {
            w.pending.insert(req.suggestion_id.clone(), p);
            return Err(ServiceError::Unavailable(format!("cannot persist feedback: {e}")));
        }
        self.policy
            .write()
            .expect("policy lock")
            .update(&record.context, record.arm_id, record.propensity, Some(reward))
            .map_err(internal)?;
        let a = record.arm_id.index();
        w.star_sum[a] += req.stars as u64;
        w.star_count[a] += 1;
        w.rated.insert(req.suggestion_id.clone(), now);
        Ok(FeedbackResponse { ok: true, updated: true })
    }

    pub fn clarify_answer(&self, req: &ClarifyRequest) -> Result<ClarifyResponse, ServiceError> {
        let mut sessions = self.sessions.lock().expect("sessions lock");
        let no_active = || ServiceError::NotFound(format!("session {:?} has no active clarification", req.session_id));
        let state = sessions.get_mut(&req.session_id).ok_or_else(no_active)?;
        let active = state.clarification.as_ref().ok_or_else(no_active)?;
        // Usually the term just asked about, but any term may be answered.
        let term = req.term.trim().to_lowercase();
        let filter = if active.filter.term == term {
            active.filter.clone()
        } else {
            active.candidates.filter_for(&term)
        };
        let remaining = apply_filter(&active.candidates, &filter, req.answer).map_err(|e| match e {
            ClarifyError::Contradiction { .. } => ServiceError::Conflict(e.to_string()),
            other => internal(other),
        })?;
        if self.config.clarifier.refeaturize && req.answer == YesNo::Yes {
            state.history.push(term);
        }
        let next = if remaining.len() <= self.config.clarifier.resolve_threshold {
            None
        } else {
            best_filter(&remaining)
        };
        let remaining_count = remaining.len();
        match next {
            Some(filter) => {
                let resp = ClarifyResponse {
                    remaining_count,
                    next_question: Some(render_question(&filter)),
                    next_term: Some(filter.term.clone()),
                    resolved_answer: None,
                };
                state.clarification = Some(Clarification {
                    candidates: remaining,
                    filter,
                });
                Ok(resp)
            }
            None => {
                let docs: Vec<ResolvedDoc> = remaining
                    .ids()
                    .iter()
                    .map(|id| ResolvedDoc {
                        doc_id: id.clone(),
                        title: self
                            .search
                            .corpus()
                            .get(id)
                            .map(|d| d.title.clone())
                            .unwrap_or_default(),
                    })
                    .collect();
                state.clarification = None;
                Ok(ClarifyResponse {
                    remaining_count,
                    next_question: None,
                    next_term: None,
                    resolved_answer: Some(docs),
                })
            }
        }
    }

    pub fn stats(&self) -> StatsResponse {
        let w = self.writer.lock().expect("writer lock");
        let policy = self.policy.read().expect("policy lock");
        let pulls = policy.pulls();
        let mean = |s: u64, n: u64| (n > 0).then(|| s as f64 / n as f64);
        StatsResponse {
            rounds: pulls.iter().sum(),
            mean_stars: mean(w.star_sum.iter().sum(), w.star_count.iter().sum()),
            mean_stars_per_arm: w.star_sum.iter().zip(&w.star_count).map(|(&s, &n)| mean(s, n)).collect(),
            pulls,
            pending: w.pending.len(),
            policy_name: policy.name().to_string(),
            uptime_s: self.started.elapsed().as_secs_f64(),
        }
    }

    /// Logs every pending suggestion as unrated and writes the snapshot.
    pub fn shutdown(&self) -> Result<(), ServiceError> {
        let mut w = self.writer.lock().expect("writer lock");
        let mut pending: Vec<(String, Pending)> = w.pending.drain().collect();
        pending.sort_by(|a, b| (a.1.created_ms, &a.0).cmp(&(b.1.created_ms, &b.0)));
        for (_, p) in pending {
            w.log.append(p.record).map_err(internal)?;
        }
        let bytes = self.policy.read().expect("policy lock").snapshot();
        write_atomic(&self.config.snapshot_path, &bytes)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ServiceError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(internal)?;
    std::fs::rename(&tmp, path).map_err(internal)
}
