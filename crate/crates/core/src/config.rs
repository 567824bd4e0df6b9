//! Run configuration: built-in defaults, overridden by a `key = value` file,
//! overridden by command-line flags.
//!
//! ```text
//! # comments and blank lines are ignored
//! weight_fmt = 0.2
//! weight_conn = 0.2
//! weight_ers = 0.2
//! weight_reach = 0.2
//! weight_rev = 0.2
//! counter = whitespace      # or chars
//! mode = lenient            # or strict
//! epsilon = 0.2
//! beta = 0.04
//! aux_graph = 1
//! aux_format = 0
//! jobs = 4
//! input = rollouts.jsonl
//! output = scores.jsonl
//! ```

use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::advantage::AuxMix;
use crate::objective::ObjectiveConfig;
use crate::rewards::RewardWeights;
use crate::tokens::CounterKind;
use crate::trace::ParseMode;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("config line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// A partial configuration. `None` leaves the lower-precedence value alone.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigLayer {
    pub weight_fmt: Option<f64>,
    pub weight_conn: Option<f64>,
    pub weight_ers: Option<f64>,
    pub weight_reach: Option<f64>,
    pub weight_rev: Option<f64>,
    pub counter: Option<CounterKind>,
    pub mode: Option<ParseMode>,
    pub epsilon: Option<f64>,
    pub beta: Option<f64>,
    pub aux_graph: Option<f64>,
    pub aux_format: Option<f64>,
    pub jobs: Option<usize>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

fn value<T: FromStr>(raw: &str) -> Result<T, String>
where
    T::Err: ToString,
{
    raw.parse::<T>().map_err(|e| e.to_string())
}

impl ConfigLayer {
    /// Parses `key = value` lines. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut layer = ConfigLayer::default();
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| ConfigError::Syntax { line, message };
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, val) = body.split_once('=').ok_or_else(|| err("expected `key = value`".into()))?;
            let (key, val) = (key.trim(), val.trim());
            if seen.contains(&key.to_owned()) {
                return Err(err(format!("`{key}` is set twice")));
            }
            seen.push(key.to_owned());
            layer.set(key, val).map_err(|m| err(format!("`{key}`: {m}")))?;
        }
        Ok(layer)
    }

    fn set(&mut self, key: &str, val: &str) -> Result<(), String> {
        match key {
            "weight_fmt" => self.weight_fmt = Some(value(val)?),
            "weight_conn" => self.weight_conn = Some(value(val)?),
            "weight_ers" => self.weight_ers = Some(value(val)?),
            "weight_reach" => self.weight_reach = Some(value(val)?),
            "weight_rev" => self.weight_rev = Some(value(val)?),
            "counter" => self.counter = Some(value(val)?),
            "mode" => self.mode = Some(value(val)?),
            "epsilon" => self.epsilon = Some(value(val)?),
            "beta" => self.beta = Some(value(val)?),
            "aux_graph" => self.aux_graph = Some(value(val)?),
            "aux_format" => self.aux_format = Some(value(val)?),
            "jobs" => self.jobs = Some(value(val)?),
            "input" => self.input = Some(PathBuf::from(val)),
            "output" => self.output = Some(PathBuf::from(val)),
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }
}

/// Effective, validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub weights: RewardWeights<f64>,
    pub counter: CounterKind,
    pub mode: ParseMode,
    /// Required by the objective command only.
    pub epsilon: Option<f64>,
    pub beta: Option<f64>,
    pub aux: AuxMix<f64>,
    pub jobs: usize,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            weights: RewardWeights::default(),
            counter: CounterKind::default(),
            mode: ParseMode::default(),
            epsilon: None,
            beta: None,
            aux: AuxMix::default(),
            jobs: 1,
            input: None,
            output: None,
        }
    }
}

/// The parts of a [`RunConfig`] that affect results, echoed in output headers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectiveConfig {
    pub weights: RewardWeights<f64>,
    pub counter: CounterKind,
    pub mode: ParseMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub aux: AuxMix<f64>,
}

impl RunConfig {
    /// Applies `layers` in increasing precedence over the defaults.
    pub fn resolve<'a>(layers: impl IntoIterator<Item = &'a ConfigLayer>) -> Result<Self, ConfigError> {
        let mut c = RunConfig::default();
        let mut aux_graph = c.aux.graph;
        let mut aux_format = c.aux.format;
        for l in layers {
            let w = &mut c.weights;
            w.fmt = l.weight_fmt.unwrap_or(w.fmt);
            w.conn = l.weight_conn.unwrap_or(w.conn);
            w.ers = l.weight_ers.unwrap_or(w.ers);
            w.reach = l.weight_reach.unwrap_or(w.reach);
            w.rev = l.weight_rev.unwrap_or(w.rev);
            c.counter = l.counter.unwrap_or(c.counter);
            c.mode = l.mode.unwrap_or(c.mode);
            c.epsilon = l.epsilon.or(c.epsilon);
            c.beta = l.beta.or(c.beta);
            aux_graph = l.aux_graph.unwrap_or(aux_graph);
            aux_format = l.aux_format.unwrap_or(aux_format);
            c.jobs = l.jobs.unwrap_or(c.jobs);
            c.input = l.input.clone().or(c.input);
            c.output = l.output.clone().or(c.output);
        }
        c.weights.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        c.aux = AuxMix::new(aux_graph, aux_format)
            .map_err(|_| ConfigError::Invalid("aux_graph and aux_format must lie in [0, 1] and sum to 1".into()))?;
        if c.jobs == 0 {
            return Err(ConfigError::Invalid("jobs must be at least 1".into()));
        }
        if let Some(e) = c.epsilon {
            if !(e.is_finite() && e > 0.0) {
                return Err(ConfigError::Invalid("epsilon must be positive".into()));
            }
        }
        if let Some(b) = c.beta {
            if !(b.is_finite() && b >= 0.0) {
                return Err(ConfigError::Invalid("beta must be non-negative".into()));
            }
        }
        Ok(c)
    }

    /// Clip radius and KL coefficient, both of which must have been given.
    pub fn objective(&self) -> Result<ObjectiveConfig<f64>, ConfigError> {
        match (self.epsilon, self.beta) {
            (Some(e), Some(b)) => ObjectiveConfig::new(e, b).map_err(|e| ConfigError::Invalid(e.to_string())),
            _ => Err(ConfigError::Invalid("the objective needs both epsilon and beta".into())),
        }
    }

    pub fn effective(&self) -> EffectiveConfig {
        EffectiveConfig {
            weights: self.weights,
            counter: self.counter,
            mode: self.mode,
            epsilon: self.epsilon,
            beta: self.beta,
            aux: self.aux,
        }
    }
}
