//! Parsing, graph rewards and advantage estimation for reasoning traces
//! written as labeled nodes with explicit parent links.
//!
//! A trace is a sequence of tagged blocks (`<known>`, `<aggregate>`, ...,
//! `<answer>`), each wrapping `<node id=".." parents="..">` elements. The
//! crate parses traces with diagnostics, builds the parent-to-child graph,
//! scores it with process rewards, turns group rewards into stratified or
//! standardized advantages, evaluates the clipped policy objective, and runs
//! structural quality control over datasets.
//!
//! Numeric code is generic over [`scalar::Scalar`] (exact rationals work) or
//! [`scalar::Real`] where exponentials or square roots are needed. The
//! aliases below fix the scalar to `f64`.
//!
//! ```
//! use grp_core::{parse_trace, score_trace, ParseMode, RewardWeights, WhitespaceCounter};
//!
//! let text = r#"<known><node id="1" parents="">x = 2</node></known>
//! <answer><node id="2" parents="1">x = 2</node></answer>"#;
//! let trace = parse_trace(text, ParseMode::Strict).trace.unwrap();
//! let r: grp_core::RewardVector = score_trace(&trace, &WhitespaceCounter, &RewardWeights::default());
//! assert_eq!(r.total, 1.0);
//! ```

pub mod scalar;
pub mod trace;
pub mod graph;
pub mod tokens;
pub mod rewards;
pub mod advantage;
pub mod objective;
pub mod qc;
pub mod config;
pub mod batch;
pub mod simulate;

pub use graph::{build_graph, NodeSet, ReasoningGraph};
pub use qc::{check_record, refinement_feedback, structural_check, QcReport, Violation, ViolationCode};
pub use rewards::{score_text, score_trace};
pub use tokens::{CharCounter, CounterKind, TokenCounter, WhitespaceCounter};
pub use trace::{parse_trace, serialize_trace, CognitiveLabel, NodeId, ParseMode, Trace};

/// Exact rational scalar for hand-checkable computations.
pub type Exact = num_rational::Rational64;

pub type RewardWeights = rewards::RewardWeights<f64>;
pub type RewardVector = rewards::RewardVector<f64>;
pub type FormatScores = rewards::FormatScores<f64>;
pub type GroupSample = advantage::GroupSample<f64>;
pub type AuxMix = advantage::AuxMix<f64>;
pub type ScaeOutput = advantage::ScaeOutput<f64>;
pub type SequenceLogProbs = objective::SequenceLogProbs<f64>;
pub type ObjectiveConfig = objective::ObjectiveConfig<f64>;
pub type ObjectiveReport = objective::ObjectiveReport<f64>;
