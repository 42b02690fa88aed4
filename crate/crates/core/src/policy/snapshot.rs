//! Policy snapshots.
//!
//! A snapshot is one line of JSON followed by `\n`. The header fields come
//! first and in this order: `format_version`, `policy_name`, `d`, `K`. Then
//! `config` (all hyperparameters), `rng` (`seed` and the ChaCha8 `word_pos` as
//! a decimal string) and `arms`, one object per arm with `pulls`, `b` (length
//! `d`) and `chol`, the lower Cholesky factor of `A_a` packed row by row
//! (length `d(d+1)/2`). Floats are written in shortest round-trip form, so a
//! restored policy makes exactly the same future choices.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::linalg::Cholesky;
use super::{ArmModel, Policy, PolicyConfig, PolicyError, PolicyName};

pub const SNAPSHOT_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct RngState {
    seed: u64,
    word_pos: String,
}

#[derive(Serialize, Deserialize)]
struct ArmSnapshot {
    pulls: u64,
    b: Vec<f64>,
    chol: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    format_version: u32,
    policy_name: PolicyName,
    d: usize,
    #[serde(rename = "K")]
    k: usize,
    config: PolicyConfig,
    rng: RngState,
    arms: Vec<ArmSnapshot>,
}

impl Policy {
    pub fn snapshot(&self) -> Vec<u8> {
        let snap = Snapshot {
            format_version: SNAPSHOT_FORMAT_VERSION,
            policy_name: self.config.name,
            d: self.dim,
            k: self.arms.len(),
            config: self.config.clone(),
            rng: RngState {
                seed: self.seed,
                word_pos: self.rng.get_word_pos().to_string(),
            },
            arms: self
                .arms
                .iter()
                .map(|a| ArmSnapshot {
                    pulls: a.pulls,
                    b: a.b.clone(),
                    chol: a.chol.packed(),
                })
                .collect(),
        };
        let mut out = serde_json::to_vec(&snap).expect("snapshot serializes");
        out.push(b'\n');
        out
    }

    /// SHA-256 of the snapshot bytes, hex encoded.
    pub fn snapshot_digest(&self) -> String {
        hex::encode(Sha256::digest(self.snapshot()))
    }

    pub fn restore(bytes: &[u8]) -> Result<Self, PolicyError> {
        let err = |m: String| PolicyError::Snapshot(m);
        let snap: Snapshot = serde_json::from_slice(bytes).map_err(|e| err(e.to_string()))?;
        if snap.format_version != SNAPSHOT_FORMAT_VERSION {
            return Err(err(format!("unsupported format_version {}", snap.format_version)));
        }
        if snap.policy_name != snap.config.name {
            return Err(err("header policy_name disagrees with config".into()));
        }
        snap.config.validate()?;
        if snap.d == 0 || snap.k == 0 || snap.arms.len() != snap.k {
            return Err(err(format!("expected {} arms, found {}", snap.k, snap.arms.len())));
        }
        let mut arms = Vec::with_capacity(snap.k);
        for (i, a) in snap.arms.into_iter().enumerate() {
            if a.b.len() != snap.d || a.b.iter().any(|v| !v.is_finite()) {
                return Err(err(format!("arm {i}: bad b vector")));
            }
            let chol = Cholesky::from_packed(snap.d, &a.chol)
                .ok_or_else(|| err(format!("arm {i}: bad Cholesky factor")))?;
            let mut model = ArmModel {
                chol,
                b: a.b,
                theta: Vec::new(),
                pulls: a.pulls,
            };
            model.refresh_theta();
            arms.push(model);
        }
        let word_pos: u128 = snap
            .rng
            .word_pos
            .parse()
            .map_err(|_| err("bad rng word_pos".into()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(snap.rng.seed);
        rng.set_word_pos(word_pos);
        Ok(Policy {
            config: snap.config,
            dim: snap.d,
            arms,
            seed: snap.rng.seed,
            rng,
        })
    }
}
