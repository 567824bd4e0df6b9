//! Group-relative advantages.
//!
//! [`scae_advantages`] splits a group by binary accuracy. Each stratum gets
//! the accuracy baseline `acc - mean_acc`; the auxiliary reward can only add
//! a bonus in the correct stratum and only subtract a penalty in the wrong
//! one, measured against that stratum's own auxiliary mean:
//!
//! ```text
//! correct:  A = (1 - mean_acc) + max(0, aux - mean_aux_correct)
//! wrong:    A = (0 - mean_acc) + min(0, aux - mean_aux_wrong)
//! ```
//!
//! Every correct sample therefore outranks every wrong one, whatever the
//! auxiliary rewards are. [`grpo_advantages`] is the plain standardization
//! baseline.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rewards::RewardVector;
use crate::scalar::{mean, Real, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdvantageError {
    #[error("group is empty")]
    EmptyGroup,
    #[error("sample {0}: accuracy reward must be exactly 0 or 1")]
    NonBinaryAccuracy(usize),
    #[error("sample {0}: auxiliary reward must lie in [0, 1]")]
    AuxOutOfRange(usize),
    #[error("sample {0}: reward is not finite")]
    NonFinite(usize),
    #[error("auxiliary mix weights must be in [0, 1] and sum to 1")]
    InvalidMix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stratum {
    Correct,
    Wrong,
}

/// One rollout's accuracy reward (0 or 1) and auxiliary reward (in `[0, 1]`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSample<T> {
    pub acc: T,
    pub aux: T,
}

impl<T: Scalar> GroupSample<T> {
    pub fn new(acc: T, aux: T) -> Self {
        Self { acc, aux }
    }

    fn check(&self, index: usize) -> Result<Stratum, AdvantageError> {
        let stratum = if self.acc == T::one() {
            Stratum::Correct
        } else if self.acc == T::zero() {
            Stratum::Wrong
        } else {
            return Err(AdvantageError::NonBinaryAccuracy(index));
        };
        if !self.aux.in_unit_interval() {
            return Err(AdvantageError::AuxOutOfRange(index));
        }
        Ok(stratum)
    }
}

/// Group-level statistics. A stratum with no members has no auxiliary mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupStats<T> {
    pub mean_acc: T,
    pub mean_aux_correct: Option<T>,
    pub mean_aux_wrong: Option<T>,
    pub correct: usize,
    pub wrong: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdvantageResult<T> {
    pub advantage: T,
    pub stratum: Stratum,
    /// Accuracy baseline of the stratum: `1 - mean_acc` or `-mean_acc`.
    pub baseline: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaeOutput<T> {
    pub stats: GroupStats<T>,
    /// One entry per input sample, in input order.
    pub results: Vec<AdvantageResult<T>>,
}

impl<T: Copy> ScaeOutput<T> {
    pub fn advantages(&self) -> Vec<T> {
        self.results.iter().map(|r| r.advantage).collect()
    }
}

/// Stratified clipping advantages for one group.
pub fn scae_advantages<T: Scalar>(group: &[GroupSample<T>]) -> Result<ScaeOutput<T>, AdvantageError> {
    if group.is_empty() {
        return Err(AdvantageError::EmptyGroup);
    }
    let strata = group
        .iter()
        .enumerate()
        .map(|(i, s)| s.check(i))
        .collect::<Result<Vec<_>, _>>()?;

    let accs: Vec<T> = group.iter().map(|s| s.acc).collect();
    let mean_acc = mean(&accs).expect("non-empty group");
    let aux_of = |want: Stratum| -> Vec<T> {
        group
            .iter()
            .zip(&strata)
            .filter(|(_, &s)| s == want)
            .map(|(s, _)| s.aux)
            .collect()
    };
    let correct_aux = aux_of(Stratum::Correct);
    let wrong_aux = aux_of(Stratum::Wrong);
    let stats = GroupStats {
        mean_acc,
        mean_aux_correct: mean(&correct_aux),
        mean_aux_wrong: mean(&wrong_aux),
        correct: correct_aux.len(),
        wrong: wrong_aux.len(),
    };

    let results = group
        .iter()
        .zip(&strata)
        .map(|(s, &stratum)| match stratum {
            Stratum::Correct => {
                let baseline = T::one() - mean_acc;
                let bar = stats.mean_aux_correct.expect("stratum is non-empty");
                let bonus = (s.aux - bar).max_of(T::zero());
                AdvantageResult { advantage: baseline + bonus, stratum, baseline }
            }
            Stratum::Wrong => {
                let baseline = T::zero() - mean_acc;
                let bar = stats.mean_aux_wrong.expect("stratum is non-empty");
                let penalty = (s.aux - bar).min_of(T::zero());
                AdvantageResult { advantage: baseline + penalty, stratum, baseline }
            }
        })
        .collect();
    Ok(ScaeOutput { stats, results })
}

/// Standardized rewards `(r - mean) / std` with the population standard
/// deviation. A group whose spread is at rounding-noise level gets all zeros.
pub fn grpo_advantages<T: Real>(rewards: &[T]) -> Result<Vec<T>, AdvantageError> {
    if rewards.is_empty() {
        return Err(AdvantageError::EmptyGroup);
    }
    if let Some(i) = rewards.iter().position(|r| !r.is_finite()) {
        return Err(AdvantageError::NonFinite(i));
    }
    let n = T::from_count(rewards.len());
    let mu = mean(rewards).expect("non-empty");
    let var = rewards.iter().fold(T::zero(), |acc, &r| acc + (r - mu) * (r - mu)) / n;
    let std = var.sqrt();
    let scale = rewards.iter().fold(T::one(), |m, r| m.max(r.abs()));
    if std <= T::epsilon() * n * scale {
        return Ok(vec![T::zero(); rewards.len()]);
    }
    Ok(rewards.iter().map(|&r| (r - mu) / std).collect())
}

/// `acc + aux` per sample: the reward a single-scalar GRPO run would see.
pub fn combined_rewards<T: Scalar>(group: &[GroupSample<T>]) -> Vec<T> {
    group.iter().map(|s| s.acc + s.aux).collect()
}

/// Convex combination that turns a reward vector into the auxiliary scalar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxMix<T> {
    /// Weight of the weighted graph-reward total.
    pub graph: T,
    /// Weight of the format sub-reward alone.
    pub format: T,
}

impl<T: Scalar> Default for AuxMix<T> {
    fn default() -> Self {
        Self { graph: T::one(), format: T::zero() }
    }
}

impl<T: Scalar> AuxMix<T> {
    pub fn new(graph: T, format: T) -> Result<Self, AdvantageError> {
        let ok = graph.in_unit_interval()
            && format.in_unit_interval()
            && (graph + format).abs_diff(T::one()) <= T::from_f64_lossy(1e-9);
        if ok {
            Ok(Self { graph, format })
        } else {
            Err(AdvantageError::InvalidMix)
        }
    }

    pub fn aux(&self, rewards: &RewardVector<T>) -> T {
        (self.graph * rewards.total + self.format * rewards.fmt.total).clamp_unit()
    }
}
