//! Reference evaluation of the GRPO clipped surrogate objective from raw
//! per-token log-probabilities.
//!
//! Per token `t` of sequence `i`:
//!
//! ```text
//! ratio      = exp(logp_new - logp_old)
//! surrogate  = min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A)
//! kl         = exp(d) - d - 1,   d = logp_ref - logp_new
//! ```
//!
//! A sequence's value is the token mean of `surrogate - beta * kl`; the
//! objective is the group mean of sequence values. Log-probabilities cover
//! completion tokens only.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{mean, Real};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ObjectiveError {
    #[error("group has no sequences")]
    EmptyGroup,
    #[error("sequence {0} has no tokens")]
    EmptySequence(usize),
    #[error("sequence {0}: log-probability and advantage lists differ in length")]
    LengthMismatch(usize),
    #[error("sequence {seq}, token {token}: log-probability is positive")]
    PositiveLogProb { seq: usize, token: usize },
    #[error("sequence {0}: non-finite value")]
    NonFinite(usize),
    #[error("clip radius epsilon must be positive and finite")]
    InvalidEpsilon,
    #[error("KL coefficient beta must be non-negative and finite")]
    InvalidBeta,
}

/// Advantage of a whole sequence or of each token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SequenceAdvantage<T> {
    Sequence(T),
    PerToken(Vec<T>),
}

impl<T: Copy> SequenceAdvantage<T> {
    fn at(&self, t: usize) -> T {
        match self {
            SequenceAdvantage::Sequence(a) => *a,
            SequenceAdvantage::PerToken(v) => v[t],
        }
    }
}

/// Per-token log-probabilities of one sampled completion under the current,
/// sampling (old) and reference policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceLogProbs<T> {
    pub logp_new: Vec<T>,
    pub logp_old: Vec<T>,
    pub logp_ref: Vec<T>,
    pub advantage: SequenceAdvantage<T>,
}

impl<T: Real> SequenceLogProbs<T> {
    fn check(&self, seq: usize) -> Result<(), ObjectiveError> {
        let n = self.logp_new.len();
        if n == 0 {
            return Err(ObjectiveError::EmptySequence(seq));
        }
        let adv_len_ok = match &self.advantage {
            SequenceAdvantage::Sequence(_) => true,
            SequenceAdvantage::PerToken(v) => v.len() == n,
        };
        if self.logp_old.len() != n || self.logp_ref.len() != n || !adv_len_ok {
            return Err(ObjectiveError::LengthMismatch(seq));
        }
        for list in [&self.logp_new, &self.logp_old, &self.logp_ref] {
            for (token, &lp) in list.iter().enumerate() {
                if !lp.is_finite() {
                    return Err(ObjectiveError::NonFinite(seq));
                }
                if lp > T::zero() {
                    return Err(ObjectiveError::PositiveLogProb { seq, token });
                }
            }
        }
        let adv_finite = match &self.advantage {
            SequenceAdvantage::Sequence(a) => a.is_finite(),
            SequenceAdvantage::PerToken(v) => v.iter().all(|a| a.is_finite()),
        };
        if !adv_finite {
            return Err(ObjectiveError::NonFinite(seq));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConfig<T> {
    pub epsilon: T,
    pub beta: T,
}

impl<T: Real> ObjectiveConfig<T> {
    pub fn new(epsilon: T, beta: T) -> Result<Self, ObjectiveError> {
        let c = Self { epsilon, beta };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ObjectiveError> {
        if !(self.epsilon.is_finite() && self.epsilon > T::zero()) {
            return Err(ObjectiveError::InvalidEpsilon);
        }
        if !(self.beta.is_finite() && self.beta >= T::zero()) {
            return Err(ObjectiveError::InvalidBeta);
        }
        Ok(())
    }
}

impl<T: Real> Default for ObjectiveConfig<T> {
    /// `epsilon = 0.2`, `beta = 0.04`.
    fn default() -> Self {
        Self { epsilon: T::from_f64_lossy(0.2), beta: T::from_f64_lossy(0.04) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenTerm<T> {
    pub ratio: T,
    pub clipped_ratio: T,
    pub advantage: T,
    pub surrogate: T,
    pub kl: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceBreakdown<T> {
    pub surrogate_mean: T,
    pub kl_mean: T,
    /// `surrogate_mean - beta * kl_mean`.
    pub value: T,
    pub tokens: Vec<TokenTerm<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveReport<T> {
    pub objective: T,
    pub mean_surrogate: T,
    pub mean_kl: T,
    pub sequences: Vec<SequenceBreakdown<T>>,
}

/// Non-negative per-token KL estimate `exp(d) - d - 1` with
/// `d = logp_ref - logp_new`.
pub fn kl_estimate<T: Real>(logp_new: &[T], logp_ref: &[T]) -> Result<Vec<T>, ObjectiveError> {
    if logp_new.len() != logp_ref.len() {
        return Err(ObjectiveError::LengthMismatch(0));
    }
    Ok(logp_new.iter().zip(logp_ref).map(|(&new, &reference)| k3(reference - new)).collect())
}

fn k3<T: Real>(d: T) -> T {
    // exp_m1 keeps precision near d = 0
    (d.exp_m1() - d).max(T::zero())
}

/// `min(ratio * adv, clip(ratio, 1 - eps, 1 + eps) * adv)`.
pub fn clipped_surrogate<T: Real>(ratio: T, advantage: T, epsilon: T) -> (T, T) {
    let clipped = ratio.max(T::one() - epsilon).min(T::one() + epsilon);
    ((ratio * advantage).min(clipped * advantage), clipped)
}

/// Evaluates the objective over a group of sampled sequences.
pub fn grpo_objective<T: Real>(
    group: &[SequenceLogProbs<T>],
    config: &ObjectiveConfig<T>,
) -> Result<ObjectiveReport<T>, ObjectiveError> {
    config.validate()?;
    if group.is_empty() {
        return Err(ObjectiveError::EmptyGroup);
    }
    let mut sequences = Vec::with_capacity(group.len());
    for (i, seq) in group.iter().enumerate() {
        seq.check(i)?;
        let kls = kl_estimate(&seq.logp_new, &seq.logp_ref)?;
        let tokens: Vec<TokenTerm<T>> = (0..seq.logp_new.len())
            .map(|t| {
                let ratio = (seq.logp_new[t] - seq.logp_old[t]).exp();
                let advantage = seq.advantage.at(t);
                let (surrogate, clipped_ratio) = clipped_surrogate(ratio, advantage, config.epsilon);
                TokenTerm { ratio, clipped_ratio, advantage, surrogate, kl: kls[t] }
            })
            .collect();
        let surrogates: Vec<T> = tokens.iter().map(|t| t.surrogate).collect();
        let surrogate_mean = mean(&surrogates).expect("non-empty sequence");
        let kl_mean = mean(&kls).expect("non-empty sequence");
        sequences.push(SequenceBreakdown { surrogate_mean, kl_mean, value: surrogate_mean - config.beta * kl_mean, tokens });
    }
    let pick = |f: fn(&SequenceBreakdown<T>) -> T| mean(&sequences.iter().map(f).collect::<Vec<_>>()).expect("non-empty group");
    let objective = pick(|s| s.value);
    let mean_surrogate = pick(|s| s.surrogate_mean);
    let mean_kl = pick(|s| s.kl_mean);
    Ok(ObjectiveReport { objective, mean_surrogate, mean_kl, sequences })
}
