//! Deterministic replay of a logged interaction stream.
//!
//! A fresh policy with the given seed sees every logged context in ordinal
//! order and chooses an arm, so its RNG stream advances exactly as it did
//! live. It learns from a record only when its choice matches the logged arm
//! and the record carries a reward.

use std::path::Path;

use super::log::read_log;
use super::EvalError;
use crate::model::{ArmId, InteractionRecord};
use crate::policy::{Policy, PolicyConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayRow {
    pub round: u64,
    pub arm: ArmId,
    pub matched: bool,
    /// Logged reward, only when the row matched and was rated.
    pub reward: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayMetrics {
    pub rows: Vec<ReplayRow>,
}

impl ReplayMetrics {
    pub fn rounds(&self) -> usize {
        self.rows.len()
    }

    pub fn matched(&self) -> usize {
        self.rows.iter().filter(|r| r.matched).count()
    }

    pub fn cumulative_reward(&self) -> f64 {
        self.rows.iter().filter_map(|r| r.reward).sum()
    }

    /// `round,reward,arm,matched`; unmatched rows leave `reward` empty.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["round", "reward", "arm", "matched"]).expect("in-memory write");
        for row in &self.rows {
            let reward = row.reward.map(|r| r.to_string()).unwrap_or_default();
            w.write_record([
                row.round.to_string(),
                reward,
                row.arm.to_string(),
                (row.matched as u8).to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

#[derive(Debug, Clone)]
pub struct ReplaySetup {
    pub policy: PolicyConfig,
    pub dim: usize,
    pub n_arms: usize,
    pub seed: u64,
}

impl ReplaySetup {
    /// Dimension from the first record, arm count from the largest logged id
    /// unless given.
    pub fn infer(
        records: &[InteractionRecord],
        policy: PolicyConfig,
        n_arms: Option<usize>,
        seed: u64,
    ) -> Result<Self, EvalError> {
        let first = records.first().ok_or(EvalError::NoUsableRecords)?;
        let max_arm = records.iter().map(|r| r.arm_id.index()).max().unwrap_or(0);
        Ok(Self {
            policy,
            dim: first.context.dim() as usize,
            n_arms: n_arms.unwrap_or(max_arm + 1),
            seed,
        })
    }
}

pub fn replay(records: &[InteractionRecord], setup: &ReplaySetup) -> Result<(Policy, ReplayMetrics), EvalError> {
    let mut policy = Policy::new(setup.policy.clone(), setup.dim, setup.n_arms, setup.seed)
        .map_err(|e| EvalError::Policy(e.to_string()))?;
    let all = policy.all_arms();
    let mut rows = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        let at = |e: crate::policy::PolicyError| EvalError::Replay {
            ordinal: rec.ordinal,
            message: e.to_string(),
        };
        if rec.arm_id.index() >= setup.n_arms {
            return Err(EvalError::Replay {
                ordinal: rec.ordinal,
                message: format!("arm {} outside 0..{}", rec.arm_id, setup.n_arms),
            });
        }
        let decision = policy.choose(&rec.context, &all).map_err(at)?;
        let matched = decision.arm == rec.arm_id;
        let mut reward = None;
        if matched && rec.reward.is_some() {
            policy
                .update(&rec.context, rec.arm_id, rec.propensity, rec.reward)
                .map_err(at)?;
            reward = rec.reward;
        }
        rows.push(ReplayRow {
            round: i as u64 + 1,
            arm: decision.arm,
            matched,
            reward,
        });
    }
    Ok((policy, ReplayMetrics { rows }))
}

pub fn replay_file(
    path: &Path,
    policy: PolicyConfig,
    n_arms: Option<usize>,
    seed: u64,
) -> Result<(Policy, ReplayMetrics), EvalError> {
    let records = read_log(path)?;
    let setup = ReplaySetup::infer(&records, policy, n_arms, seed)?;
    replay(&records, &setup)
}
