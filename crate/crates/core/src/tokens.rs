//! Token counting for node content.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Deterministic token count of a node's content. Must return 0 for "".
pub trait TokenCounter: Send + Sync {
    fn count(&self, text: &str) -> usize;
}

/// Counts maximal runs of non-whitespace (Unicode whitespace).
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceCounter;

impl TokenCounter for WhitespaceCounter {
    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}

/// Counts Unicode scalar values.
#[derive(Debug, Clone, Copy, Default)]
pub struct CharCounter;

impl TokenCounter for CharCounter {
    fn count(&self, text: &str) -> usize {
        text.chars().count()
    }
}

impl<F> TokenCounter for F
where
    F: Fn(&str) -> usize + Send + Sync,
{
    fn count(&self, text: &str) -> usize {
        self(text)
    }
}

/// Built-in counter selectable from configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CounterKind {
    #[default]
    Whitespace,
    Chars,
}

impl TokenCounter for CounterKind {
    fn count(&self, text: &str) -> usize {
        match self {
            CounterKind::Whitespace => WhitespaceCounter.count(text),
            CounterKind::Chars => CharCounter.count(text),
        }
    }
}

impl FromStr for CounterKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "whitespace" => Ok(CounterKind::Whitespace),
            "chars" => Ok(CounterKind::Chars),
            other => Err(format!("unknown token counter `{other}` (expected whitespace or chars)")),
        }
    }
}

impl CounterKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CounterKind::Whitespace => "whitespace",
            CounterKind::Chars => "chars",
        }
    }
}
