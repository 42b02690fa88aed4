//! Inverse-propensity estimators for a deterministic target policy.
//!
//! With logged `(x_i, a_i, p_i, r_i)` and target action `π(x_i)`, the weight
//! is `w_i = 1[π(x_i) = a_i] / p_i`.
//!
//! - IPS: `(1/m) Σ r_i w_i` over the `m` records carrying a reward.
//! - SNIPS: `Σ r_i w_i / Σ w_i`.
//!
//! Propensities are floored when logged, so no clipping happens here.

use super::EvalError;
use crate::model::{ArmId, FeatureVector, InteractionRecord};
use crate::policy::Policy;

/// A policy evaluated by its single deterministic action per context.
pub trait TargetPolicy {
    fn action(&self, x: &FeatureVector) -> Result<ArmId, EvalError>;
}

impl TargetPolicy for Policy {
    fn action(&self, x: &FeatureVector) -> Result<ArmId, EvalError> {
        self.greedy_action(x, &self.all_arms())
            .map_err(|e| EvalError::Target(e.to_string()))
    }
}

/// Adapts a closure into a target policy.
pub struct FnTarget<F>(pub F);

impl<F: Fn(&FeatureVector) -> ArmId> TargetPolicy for FnTarget<F> {
    fn action(&self, x: &FeatureVector) -> Result<ArmId, EvalError> {
        Ok((self.0)(x))
    }
}

pub const DEFAULT_MIN_PROPENSITY: f64 = 0.01;

/// `(reward, weight)` for each record with a reward.
fn weighted<T: TargetPolicy + ?Sized>(
    records: &[InteractionRecord],
    target: &T,
    min_propensity: f64,
) -> Result<Vec<(f64, f64)>, EvalError> {
    let mut out = Vec::new();
    for rec in records {
        let Some(r) = rec.reward else {
            continue;
        };
        if !(rec.propensity >= min_propensity && rec.propensity <= 1.0) {
            return Err(EvalError::Propensity {
                ordinal: rec.ordinal,
                propensity: rec.propensity,
            });
        }
        let w = if target.action(&rec.context)? == rec.arm_id {
            1.0 / rec.propensity
        } else {
            0.0
        };
        out.push((r, w));
    }
    if out.is_empty() {
        return Err(EvalError::NoUsableRecords);
    }
    Ok(out)
}

pub fn ips_estimate<T: TargetPolicy + ?Sized>(records: &[InteractionRecord], target: &T) -> Result<f64, EvalError> {
    ips_estimate_with(records, target, DEFAULT_MIN_PROPENSITY)
}

pub fn ips_estimate_with<T: TargetPolicy + ?Sized>(
    records: &[InteractionRecord],
    target: &T,
    min_propensity: f64,
) -> Result<f64, EvalError> {
    let rw = weighted(records, target, min_propensity)?;
    Ok(rw.iter().map(|(r, w)| r * w).sum::<f64>() / rw.len() as f64)
}

pub fn snips_estimate<T: TargetPolicy + ?Sized>(records: &[InteractionRecord], target: &T) -> Result<f64, EvalError> {
    snips_estimate_with(records, target, DEFAULT_MIN_PROPENSITY)
}

pub fn snips_estimate_with<T: TargetPolicy + ?Sized>(
    records: &[InteractionRecord],
    target: &T,
    min_propensity: f64,
) -> Result<f64, EvalError> {
    let rw = weighted(records, target, min_propensity)?;
    let total_w: f64 = rw.iter().map(|(_, w)| w).sum();
    if total_w <= 0.0 {
        return Err(EvalError::ZeroWeight);
    }
    Ok(rw.iter().map(|(r, w)| r * w).sum::<f64>() / total_w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(arm: u32, reward: Option<f64>, propensity: f64) -> InteractionRecord {
        InteractionRecord {
            ordinal: 0,
            ts: 0,
            session_id: "s".into(),
            context: FeatureVector::from_pairs(2, [(0, 1.0)]).unwrap(),
            arm_id: ArmId(arm),
            propensity,
            reward,
            policy_name: "uniform".into(),
            stars: None,
            seed_state_digest: None,
        }
    }

    fn always(arm: u32) -> FnTarget<impl Fn(&FeatureVector) -> ArmId> {
        FnTarget(move |_: &FeatureVector| ArmId(arm))
    }

    #[test]
    fn two_record_example() {
        let log = vec![rec(0, Some(1.0), 0.5), rec(1, Some(0.5), 0.5)];
        assert_eq!(ips_estimate(&log, &always(0)).unwrap(), 1.0);
        assert_eq!(snips_estimate(&log, &always(0)).unwrap(), 1.0);
    }

    #[test]
    fn no_match_gives_zero_ips_and_snips_error() {
        let log = vec![rec(0, Some(1.0), 0.5), rec(1, Some(0.5), 0.5)];
        assert_eq!(ips_estimate(&log, &always(2)).unwrap(), 0.0);
        assert_eq!(snips_estimate(&log, &always(2)), Err(EvalError::ZeroWeight));
    }

    #[test]
    fn realized_actions_give_mean_reward_with_unit_propensity() {
        // Deterministic logger: propensity 1, target reproduces every action.
        let mut log = Vec::new();
        for (i, r) in [0.0, 0.25, 1.0, 0.5].into_iter().enumerate() {
            let mut x = rec(0, Some(r), 1.0);
            x.context = FeatureVector::from_pairs(4, [(i as u32, 1.0)]).unwrap();
            x.arm_id = ArmId(i as u32 % 2);
            log.push(x);
        }
        let target = FnTarget(|x: &FeatureVector| ArmId(x.indices()[0] % 2));
        assert_eq!(ips_estimate(&log, &target).unwrap(), 0.4375);
        assert_eq!(snips_estimate(&log, &target).unwrap(), 0.4375);
    }

    #[test]
    fn uniform_weights_give_plain_mean() {
        let log = vec![rec(0, Some(1.0), 0.25), rec(0, Some(0.5), 0.25), rec(1, Some(0.0), 0.25)];
        assert_eq!(snips_estimate(&log, &always(0)).unwrap(), 0.75);
    }

    #[test]
    fn rewardless_records_are_skipped() {
        let log = vec![rec(0, None, 0.5)];
        assert_eq!(ips_estimate(&log, &always(0)), Err(EvalError::NoUsableRecords));
        let log = vec![rec(0, None, 0.5), rec(0, Some(0.5), 0.5)];
        assert_eq!(ips_estimate(&log, &always(0)).unwrap(), 1.0);
    }

    #[test]
    fn propensity_below_floor_rejected() {
        let log = vec![rec(0, Some(1.0), 0.001)];
        assert!(matches!(ips_estimate(&log, &always(0)), Err(EvalError::Propensity { .. })));
    }
}
