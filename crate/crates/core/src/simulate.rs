//! Synthetic reward-hacking scenario: groups where wrong rollouts collect
//! high auxiliary reward. Compares how often a wrong rollout gets a positive
//! advantage under stratified clipping versus plain GRPO on `acc + aux`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::advantage::{combined_rewards, grpo_advantages, scae_advantages, GroupSample, Stratum};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("group size must be at least 1")]
    GroupSize,
    #[error("number of groups must be at least 1")]
    Groups,
    #[error("fraction correct must lie in [0, 1]")]
    Fraction,
    #[error("{0} aux range must satisfy 0 <= low <= high <= 1")]
    Range(&'static str),
}

/// Closed interval sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxRange {
    pub low: f64,
    pub high: f64,
}

impl AuxRange {
    pub fn new(low: f64, high: f64) -> Self {
        Self { low, high }
    }

    fn valid(&self) -> bool {
        0.0 <= self.low && self.low <= self.high && self.high <= 1.0
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        rng.random_range(self.low..=self.high)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub groups: usize,
    pub group_size: usize,
    /// Each sample is correct with this probability.
    pub frac_correct: f64,
    pub correct_aux: AuxRange,
    pub wrong_aux: AuxRange,
    pub seed: u64,
}

impl Scenario {
    /// Few correct rollouts with low aux, many wrong ones with high aux.
    pub fn witness(seed: u64) -> Self {
        Self {
            groups: 1000,
            group_size: 8,
            frac_correct: 0.25,
            correct_aux: AuxRange::new(0.0, 0.3),
            wrong_aux: AuxRange::new(0.7, 1.0),
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.groups == 0 {
            return Err(ScenarioError::Groups);
        }
        if self.group_size == 0 {
            return Err(ScenarioError::GroupSize);
        }
        if !(0.0..=1.0).contains(&self.frac_correct) {
            return Err(ScenarioError::Fraction);
        }
        if !self.correct_aux.valid() {
            return Err(ScenarioError::Range("correct"));
        }
        if !self.wrong_aux.valid() {
            return Err(ScenarioError::Range("wrong"));
        }
        Ok(())
    }

    /// All groups, drawn from one seeded stream.
    pub fn generate(&self) -> Result<Vec<Vec<GroupSample<f64>>>, ScenarioError> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let groups = (0..self.groups)
            .map(|_| {
                (0..self.group_size)
                    .map(|_| {
                        let correct = rng.random_bool(self.frac_correct);
                        let range = if correct { self.correct_aux } else { self.wrong_aux };
                        GroupSample::new(if correct { 1.0 } else { 0.0 }, range.sample(&mut rng))
                    })
                    .collect()
            })
            .collect();
        Ok(groups)
    }
}

/// Advantage statistics of one estimator over the wrong rollouts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WrongStats {
    pub positive: usize,
    /// `positive / wrong_samples`; 0 when there are no wrong samples.
    pub positive_fraction: f64,
    pub max_advantage: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub scenario: Scenario,
    pub samples: usize,
    pub wrong_samples: usize,
    /// Groups holding both correct and wrong rollouts.
    pub mixed_groups: usize,
    pub scae: WrongStats,
    pub grpo: WrongStats,
}

fn wrong_stats(advantages: &[f64], wrong: usize) -> WrongStats {
    let positive = advantages.iter().filter(|&&a| a > 0.0).count();
    WrongStats {
        positive,
        positive_fraction: if wrong == 0 { 0.0 } else { positive as f64 / wrong as f64 },
        max_advantage: advantages.iter().copied().reduce(f64::max),
    }
}

pub fn simulate(scenario: &Scenario) -> Result<SimulationReport, ScenarioError> {
    let groups = scenario.generate()?;
    let mut scae_wrong = Vec::new();
    let mut grpo_wrong = Vec::new();
    let mut mixed_groups = 0;
    for group in &groups {
        let scae = scae_advantages(group).expect("generated samples are valid");
        let grpo = grpo_advantages(&combined_rewards(group)).expect("generated rewards are finite");
        mixed_groups += usize::from(scae.stats.correct > 0 && scae.stats.wrong > 0);
        for (r, g) in scae.results.iter().zip(grpo) {
            if r.stratum == Stratum::Wrong {
                scae_wrong.push(r.advantage);
                grpo_wrong.push(g);
            }
        }
    }
    let wrong = scae_wrong.len();
    Ok(SimulationReport {
        scenario: *scenario,
        samples: scenario.groups * scenario.group_size,
        wrong_samples: wrong,
        mixed_groups,
        scae: wrong_stats(&scae_wrong, wrong),
        grpo: wrong_stats(&grpo_wrong, wrong),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn witness_contrast() {
        let r = simulate(&Scenario::witness(7)).unwrap();
        assert_eq!(r.scae.positive, 0);
        assert_eq!(r.scae.positive_fraction, 0.0);
        assert!(r.grpo.positive_fraction > 0.0, "{r:?}");
        assert!(r.mixed_groups > 0);
    }

    #[test]
    fn deterministic_under_seed() {
        let s = Scenario::witness(42);
        assert_eq!(simulate(&s).unwrap(), simulate(&s).unwrap());
        let other = Scenario { seed: 43, ..s };
        assert_ne!(s.generate().unwrap(), other.generate().unwrap());
    }

    #[test]
    fn rejects_bad_parameters() {
        let s = Scenario::witness(0);
        assert_eq!(Scenario { group_size: 0, ..s }.validate(), Err(ScenarioError::GroupSize));
        assert_eq!(Scenario { frac_correct: 1.5, ..s }.validate(), Err(ScenarioError::Fraction));
        let bad = AuxRange::new(0.9, 0.2);
        assert_eq!(Scenario { wrong_aux: bad, ..s }.validate(), Err(ScenarioError::Range("wrong")));
    }

    #[test]
    fn all_wrong_groups() {
        let s = Scenario { frac_correct: 0.0, groups: 5, ..Scenario::witness(1) };
        let r = simulate(&s).unwrap();
        assert_eq!(r.wrong_samples, 40);
        assert_eq!(r.mixed_groups, 0);
        assert_eq!(r.scae.positive, 0);
    }
}
