//! Synthetic environment for offline experiments.
//!
//! Contexts come from `C` unit-norm cluster centers in `R^d`: a round picks a
//! center uniformly and returns `normalize(c_j + σ_x g)` with `g ~ N(0, I)`.
//! Each arm has an expected reward `μ_a(x)` in `[0, 1]` and the simulated
//! agent reports `stars = clamp(round(1 + 4(μ_a(x) + ε)), 1, 5)` with
//! `ε ~ N(0, σ_r²)`.
//!
//! Two reward models:
//! - `linear`: `μ_a(x) = clamp(w_aᵀx, 0, 1)`, with `w_a` a perturbed copy of
//!   center `a mod C` scaled to norm 0.9.
//! - `cluster_step`: `μ_a(x) = 0.9` for the arm assigned to the nearest center
//!   and `0.1` otherwise. Not linear in `x`.
//!
//! Per-round regret is `max_a μ_a(x) − μ_chosen(x)`. The expected normalized
//! rating `E[(stars − 1)/4]` is also available in closed form; it is the true
//! value that off-policy estimates converge to.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::evaluation::{EvalError, RecordSink};
use crate::model::{ArmId, FeatureVector, InteractionRecord};
use crate::policy::{Decision, Policy, PolicyConfig, PolicyError};

pub const DEFAULT_ENV_SEED: u64 = 20_240_601;

const WEIGHT_NORM: f64 = 0.9;
const WEIGHT_JITTER: f64 = 0.5;
const STEP_HIGH: f64 = 0.9;
const STEP_LOW: f64 = 0.1;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid environment: {0}")]
    Config(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Log(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardModel {
    Linear,
    ClusterStep,
}

impl fmt::Display for RewardModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RewardModel::Linear => "linear",
            RewardModel::ClusterStep => "cluster_step",
        })
    }
}

impl FromStr for RewardModel {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(RewardModel::Linear),
            "cluster_step" => Ok(RewardModel::ClusterStep),
            other => Err(SimError::Config(format!("unknown reward model {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub arms: usize,
    pub dimension: usize,
    pub clusters: usize,
    /// Context noise scale.
    pub sigma: f64,
    /// Rating noise scale; `sigma` when absent.
    pub rating_noise: Option<f64>,
    pub reward_model: RewardModel,
    /// Seed for the environment's parameters (centers, weights).
    pub seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            arms: 10,
            dimension: 32,
            clusters: 8,
            sigma: 0.1,
            rating_noise: None,
            reward_model: RewardModel::Linear,
            seed: DEFAULT_ENV_SEED,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticEnv {
    reward_model: RewardModel,
    centers: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
    step_arm: Vec<usize>,
    context_noise: f64,
    rating_noise: f64,
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn dot(a: &[f64], x: &FeatureVector) -> f64 {
    x.dot_dense(a)
}

impl SyntheticEnv {
    pub fn new(config: &EnvConfig) -> Result<Self, SimError> {
        if config.arms == 0 || config.dimension == 0 || config.clusters == 0 {
            return Err(SimError::Config("arms, dimension and clusters must be positive".into()));
        }
        let rating_noise = config.rating_noise.unwrap_or(config.sigma);
        if !(config.sigma >= 0.0 && rating_noise >= 0.0) || !config.sigma.is_finite() || !rating_noise.is_finite() {
            return Err(SimError::Config("noise scales must be finite and non-negative".into()));
        }
        let d = config.dimension;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let centers: Vec<Vec<f64>> = (0..config.clusters).map(|_| unit(gaussian(&mut rng, d))).collect();
        let scale = WEIGHT_JITTER / (d as f64).sqrt();
        let weights = (0..config.arms)
            .map(|a| {
                let g = gaussian(&mut rng, d);
                let raw = centers[a % config.clusters].iter().zip(g).map(|(c, e)| c + scale * e).collect();
                unit(raw).into_iter().map(|v| v * WEIGHT_NORM).collect()
            })
            .collect();
        let mut perm: Vec<usize> = (0..config.arms).collect();
        for i in (1..perm.len()).rev() {
            let j = rng.random_range(0..=i);
            perm.swap(i, j);
        }
        let step_arm = (0..config.clusters).map(|j| perm[j % config.arms]).collect();
        Ok(Self {
            reward_model: config.reward_model,
            centers,
            weights,
            step_arm,
            context_noise: config.sigma,
            rating_noise,
        })
    }

    /// Linear environment from explicit parts.
    pub fn from_parts(
        centers: Vec<Vec<f64>>,
        weights: Vec<Vec<f64>>,
        context_noise: f64,
        rating_noise: f64,
    ) -> Result<Self, SimError> {
        let d = centers.first().map(Vec::len).unwrap_or(0);
        if d == 0 || weights.is_empty() {
            return Err(SimError::Config("need at least one center and one arm".into()));
        }
        if centers.iter().chain(&weights).any(|v| v.len() != d) {
            return Err(SimError::Config("all vectors must share one dimension".into()));
        }
        if !(context_noise >= 0.0 && rating_noise >= 0.0) {
            return Err(SimError::Config("noise scales must be non-negative".into()));
        }
        Ok(Self {
            reward_model: RewardModel::Linear,
            step_arm: vec![0; centers.len()],
            centers,
            weights,
            context_noise,
            rating_noise,
        })
    }

    pub fn n_arms(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.centers[0].len()
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn rating_noise(&self) -> f64 {
        self.rating_noise
    }

    /// Draws a cluster and a context; with zero context noise the context is
    /// exactly that center.
    pub fn gen_context<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, FeatureVector) {
        let j = rng.random_range(0..self.centers.len());
        let g: Vec<f64> = (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect();
        let c = &self.centers[j];
        let v = if self.context_noise == 0.0 {
            c.clone()
        } else {
            unit(c.iter().zip(g).map(|(c, e)| c + self.context_noise * e).collect())
        };
        (j, FeatureVector::from_dense(&v).expect("finite context"))
    }

    fn nearest_center(&self, x: &FeatureVector) -> usize {
        let mut best = 0;
        let mut best_s = f64::NEG_INFINITY;
        for (j, c) in self.centers.iter().enumerate() {
            let s = dot(c, x);
            if s > best_s {
                best = j;
                best_s = s;
            }
        }
        best
    }

    /// `μ_a(x)`.
    pub fn mean_reward(&self, x: &FeatureVector, arm: ArmId) -> f64 {
        match self.reward_model {
            RewardModel::Linear => dot(&self.weights[arm.index()], x).clamp(0.0, 1.0),
            RewardModel::ClusterStep => {
                if self.step_arm[self.nearest_center(x)] == arm.index() {
                    STEP_HIGH
                } else {
                    STEP_LOW
                }
            }
        }
    }

    /// Star rating for one pull; always consumes one normal draw.
    pub fn simulate_rating<R: Rng + ?Sized>(&self, x: &FeatureVector, arm: ArmId, rng: &mut R) -> u8 {
        let eps: f64 = rng.sample(StandardNormal);
        stars_for(self.mean_reward(x, arm) + self.rating_noise * eps)
    }

    /// `E[(stars − 1)/4 | x, a]` in closed form.
    pub fn expected_reward(&self, x: &FeatureVector, arm: ArmId) -> f64 {
        expected_normalized_stars(self.mean_reward(x, arm), self.rating_noise)
    }

    pub fn best_mean_reward(&self, x: &FeatureVector) -> f64 {
        (0..self.n_arms())
            .map(|a| self.mean_reward(x, ArmId::from(a)))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn stars_for(score: f64) -> u8 {
    (1.0 + 4.0 * score).round().clamp(1.0, 5.0) as u8
}

/// Stars step up at `score = (s − 0.5)/4` for `s = 1..4`, so
/// `E[(stars−1)/4] = (1/4) Σ_s P(score + ε ≥ (s − 0.5)/4)`.
pub fn expected_normalized_stars(mean: f64, noise: f64) -> f64 {
    let thresholds = [0.125, 0.375, 0.625, 0.875];
    if noise == 0.0 {
        return (stars_for(mean) - 1) as f64 / 4.0;
    }
    let n = Normal::new(mean, noise).expect("positive noise");
    thresholds.iter().map(|&t| 1.0 - n.cdf(t)).sum::<f64>() / 4.0
}

/// Anything that picks arms and learns from ratings.
pub trait Chooser {
    fn label(&self) -> String;
    fn decide(&mut self, x: &FeatureVector, available: &[ArmId]) -> Result<Decision, PolicyError>;
    fn learn(&mut self, x: &FeatureVector, arm: ArmId, propensity: f64, reward: Option<f64>) -> Result<(), PolicyError>;
    fn state_digest(&self) -> Option<String> {
        None
    }
}

impl Chooser for Policy {
    fn label(&self) -> String {
        self.name().to_string()
    }

    fn decide(&mut self, x: &FeatureVector, available: &[ArmId]) -> Result<Decision, PolicyError> {
        self.choose(x, available)
    }

    fn learn(&mut self, x: &FeatureVector, arm: ArmId, propensity: f64, reward: Option<f64>) -> Result<(), PolicyError> {
        self.update(x, arm, propensity, reward).map(|_| ())
    }

    fn state_digest(&self) -> Option<String> {
        Some(self.rng_digest())
    }
}

/// Picks the arm with the largest `μ_a(x)`.
pub struct Oracle<'a> {
    pub env: &'a SyntheticEnv,
}

impl Chooser for Oracle<'_> {
    fn label(&self) -> String {
        "oracle".into()
    }

    fn decide(&mut self, x: &FeatureVector, available: &[ArmId]) -> Result<Decision, PolicyError> {
        let mut best: Option<(ArmId, f64)> = None;
        for &a in available {
            let v = self.env.mean_reward(x, a);
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((a, v));
            }
        }
        let (arm, _) = best.ok_or(PolicyError::NoArms)?;
        Ok(Decision { arm, propensity: 1.0 })
    }

    fn learn(&mut self, _: &FeatureVector, _: ArmId, _: f64, _: Option<f64>) -> Result<(), PolicyError> {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub round: u64,
    pub reward: f64,
    /// Cumulative expected regret through this round.
    pub regret: f64,
    pub arm: ArmId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimMetrics {
    pub rows: Vec<CurveRow>,
    pub pulls: Vec<u64>,
}

impl SimMetrics {
    pub fn cumulative_reward(&self) -> f64 {
        self.rows.iter().map(|r| r.reward).sum()
    }

    pub fn cumulative_regret(&self) -> f64 {
        self.rows.last().map(|r| r.regret).unwrap_or(0.0)
    }

    /// `round,reward,regret,arm`, one row per round.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["round", "reward", "regret", "arm"]).expect("in-memory write");
        for r in &self.rows {
            w.write_record([r.round.to_string(), r.reward.to_string(), r.regret.to_string(), r.arm.to_string()])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

/// The environment's private stream: same seed as the policy, stream 1.
pub fn env_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Runs `rounds` interactions. Contexts and ratings come from [`env_rng`]`(seed)`;
/// each finalized interaction goes to `sink` when given.
pub fn run<C: Chooser + ?Sized>(
    env: &SyntheticEnv,
    chooser: &mut C,
    rounds: u64,
    seed: u64,
    mut sink: Option<&mut dyn RecordSink>,
) -> Result<SimMetrics, SimError> {
    let mut rng = env_rng(seed);
    let arms: Vec<ArmId> = (0..env.n_arms()).map(ArmId::from).collect();
    let label = chooser.label();
    let mut rows = Vec::with_capacity(rounds as usize);
    let mut pulls = vec![0u64; env.n_arms()];
    let mut regret = 0.0;
    for t in 1..=rounds {
        let (_, x) = env.gen_context(&mut rng);
        let digest = chooser.state_digest();
        let d = chooser.decide(&x, &arms)?;
        let stars = env.simulate_rating(&x, d.arm, &mut rng);
        let reward = (stars - 1) as f64 / 4.0;
        regret += env.best_mean_reward(&x) - env.mean_reward(&x, d.arm);
        chooser.learn(&x, d.arm, d.propensity, Some(reward))?;
        pulls[d.arm.index()] += 1;
        if let Some(s) = sink.as_deref_mut() {
            s.append(InteractionRecord {
                ordinal: t - 1,
                ts: t,
                session_id: "sim".into(),
                context: x,
                arm_id: d.arm,
                propensity: d.propensity,
                reward: Some(reward),
                policy_name: label.clone(),
                stars: Some(stars),
                seed_state_digest: digest,
            })?;
        }
        rows.push(CurveRow {
            round: t,
            reward,
            regret,
            arm: d.arm,
        });
    }
    Ok(SimMetrics { rows, pulls })
}

/// Builds a fresh policy seeded with `seed` and runs it.
pub fn run_simulation(
    env: &SyntheticEnv,
    config: PolicyConfig,
    rounds: u64,
    seed: u64,
    sink: Option<&mut dyn RecordSink>,
) -> Result<(Policy, SimMetrics), SimError> {
    let mut policy = Policy::new(config, env.dim(), env.n_arms(), seed)?;
    let metrics = run(env, &mut policy, rounds, seed, sink)?;
    Ok((policy, metrics))
}
