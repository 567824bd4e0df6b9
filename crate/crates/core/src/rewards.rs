//! Process-aware graph rewards.
//!
//! Five components, each in `[0, 1]`:
//!
//! | field   | meaning                                                        |
//! |---------|----------------------------------------------------------------|
//! | `fmt`   | mean of node density, topological validity and parallelism     |
//! | `conn`  | `1 / n` for `n` weakly connected components                    |
//! | `ers`   | token share of the effective reasoning subgraph                |
//! | `reach` | 1 if some premise reaches the answer node, else 0              |
//! | `rev`   | share of nodes that are ancestors of the answer node           |
//!
//! `total` is their weighted sum. An empty graph scores 0 everywhere, and the
//! answer-dependent components (`ers`, `reach`, `rev`) are 0 without an answer.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{build_graph, ReasoningGraph};
use crate::scalar::Scalar;
use crate::tokens::TokenCounter;
use crate::trace::{parse_trace, CognitiveLabel, Diagnostic, NodeId, ParseMode, TagBlock, Trace};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RewardError {
    #[error("reward weights must sum to 1 (got {0})")]
    WeightSum(String),
    #[error("reward weight `{0}` is outside [0, 1]")]
    WeightRange(&'static str),
    #[error("reward component `{0}` is outside [0, 1]")]
    ComponentRange(&'static str),
}

/// Weights of the five components; non-negative, summing to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights<T> {
    pub fmt: T,
    pub conn: T,
    pub ers: T,
    pub reach: T,
    pub rev: T,
}

impl<T: Scalar> Default for RewardWeights<T> {
    /// Equal weights of 1/5.
    fn default() -> Self {
        let w = T::one() / T::from_count(5);
        Self { fmt: w, conn: w, ers: w, reach: w, rev: w }
    }
}

impl<T: Scalar> RewardWeights<T> {
    pub fn new(fmt: T, conn: T, ers: T, reach: T, rev: T) -> Result<Self, RewardError> {
        let w = Self { fmt, conn, ers, reach, rev };
        w.validate()?;
        Ok(w)
    }

    fn named(&self) -> [(&'static str, T); 5] {
        [("fmt", self.fmt), ("conn", self.conn), ("ers", self.ers), ("reach", self.reach), ("rev", self.rev)]
    }

    pub fn validate(&self) -> Result<(), RewardError> {
        for (name, w) in self.named() {
            if !w.in_unit_interval() {
                return Err(RewardError::WeightRange(name));
            }
        }
        let sum = self.named().iter().fold(T::zero(), |acc, &(_, w)| acc + w);
        if sum.abs_diff(T::one()) > T::from_f64_lossy(1e-9) {
            return Err(RewardError::WeightSum(format!("{sum:?}")));
        }
        Ok(())
    }
}

/// Label-structure format sub-rewards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormatScores<T> {
    /// Share of aggregate/refine tag blocks wrapping exactly one node.
    pub dens: T,
    /// Share of known/aggregate/refine nodes with a valid parent count.
    pub topo: T,
    /// Share of reasoning tag blocks without intra-block parent links.
    pub para: T,
    /// `(dens + topo + para) / 3`.
    pub total: T,
}

impl<T: Scalar> FormatScores<T> {
    pub fn new(dens: T, topo: T, para: T) -> Self {
        Self { dens, topo, para, total: (dens + topo + para) / T::from_count(3) }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn is_perfect(&self) -> bool {
        self.dens == T::one() && self.topo == T::one() && self.para == T::one()
    }
}

/// The five components before weighting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardComponents<T> {
    pub fmt: FormatScores<T>,
    pub conn: T,
    pub ers: T,
    pub reach: T,
    pub rev: T,
}

/// Components plus their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    into = "FlatRewards<T>",
    from = "FlatRewards<T>",
    bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>")
)]
pub struct RewardVector<T> {
    pub fmt: FormatScores<T>,
    pub conn: T,
    pub ers: T,
    pub reach: T,
    pub rev: T,
    pub total: T,
}

/// Flat JSON layout of [`RewardVector`]; field names are part of the output
/// contract.
#[derive(Serialize, Deserialize)]
struct FlatRewards<T> {
    fmt_dens: T,
    fmt_topo: T,
    fmt_para: T,
    fmt: T,
    conn: T,
    ers: T,
    reach: T,
    rev: T,
    total: T,
}

impl<T: Scalar> From<RewardVector<T>> for FlatRewards<T> {
    fn from(r: RewardVector<T>) -> Self {
        Self {
            fmt_dens: r.fmt.dens,
            fmt_topo: r.fmt.topo,
            fmt_para: r.fmt.para,
            fmt: r.fmt.total,
            conn: r.conn,
            ers: r.ers,
            reach: r.reach,
            rev: r.rev,
            total: r.total,
        }
    }
}

impl<T: Scalar> From<FlatRewards<T>> for RewardVector<T> {
    fn from(f: FlatRewards<T>) -> Self {
        Self {
            fmt: FormatScores { dens: f.fmt_dens, topo: f.fmt_topo, para: f.fmt_para, total: f.fmt },
            conn: f.conn,
            ers: f.ers,
            reach: f.reach,
            rev: f.rev,
            total: f.total,
        }
    }
}

impl<T: Scalar> RewardVector<T> {
    pub fn zero() -> Self {
        Self {
            fmt: FormatScores::zero(),
            conn: T::zero(),
            ers: T::zero(),
            reach: T::zero(),
            rev: T::zero(),
            total: T::zero(),
        }
    }

    pub fn components(&self) -> RewardComponents<T> {
        RewardComponents { fmt: self.fmt, conn: self.conn, ers: self.ers, reach: self.reach, rev: self.rev }
    }

    /// Every scalar field paired with its flat name.
    pub fn fields(&self) -> [(&'static str, T); 9] {
        [
            ("fmt_dens", self.fmt.dens),
            ("fmt_topo", self.fmt.topo),
            ("fmt_para", self.fmt.para),
            ("fmt", self.fmt.total),
            ("conn", self.conn),
            ("ers", self.ers),
            ("reach", self.reach),
            ("rev", self.rev),
            ("total", self.total),
        ]
    }
}

fn ratio<T: Scalar>(hits: usize, of: usize) -> T {
    if of == 0 {
        T::one()
    } else {
        T::from_count(hits) / T::from_count(of)
    }
}

/// Density, topology and parallelism scores.
///
/// Parent counts come from the graph, so edges dropped during lenient parsing
/// do not count. A sub-score whose population is empty is 1.
pub fn reward_format<T: Scalar>(trace: &Trace, graph: &ReasoningGraph) -> FormatScores<T> {
    if graph.is_empty() {
        return FormatScores::zero();
    }
    use CognitiveLabel::*;

    let dens_blocks = trace.blocks.iter().filter(|b| matches!(b.label, Aggregate | Refine));
    let (dense, dens_total) = dens_blocks.fold((0, 0), |(hit, all), b| (hit + usize::from(b.nodes.len() == 1), all + 1));

    let mut topo_hits = 0;
    let mut topo_total = 0;
    for node in graph.nodes() {
        let ok = match node.label {
            Known => node.in_degree() == 0,
            Aggregate => node.in_degree() > 1,
            Refine => node.in_degree() == 1,
            _ => continue,
        };
        topo_total += 1;
        topo_hits += usize::from(ok);
    }

    let mut para_hits = 0;
    let mut para_total = 0;
    for block in trace.blocks.iter().filter(|b| b.label.is_reasoning()) {
        para_total += 1;
        para_hits += usize::from(intra_block_links(block, graph).is_empty());
    }

    FormatScores::new(ratio(dense, dens_total), ratio(topo_hits, topo_total), ratio(para_hits, para_total))
}

/// `(parent, child)` links between nodes of the same block.
pub(crate) fn intra_block_links(block: &TagBlock, graph: &ReasoningGraph) -> Vec<(NodeId, NodeId)> {
    let members: HashSet<NodeId> = block.nodes.iter().map(|n| n.id).collect();
    let mut links = Vec::new();
    for node in &block.nodes {
        if let Some(parents) = graph.parents_of(node.id) {
            links.extend(parents.filter(|p| members.contains(p)).map(|p| (p, node.id)));
        }
    }
    links
}

/// `1 / n` for `n` weakly connected components; 0 for an empty graph.
pub fn reward_connectivity<T: Scalar>(graph: &ReasoningGraph) -> T {
    match graph.component_count() {
        Ok(n) => T::one() / T::from_count(n),
        Err(_) => T::zero(),
    }
}

/// Token mass of the effective reasoning subgraph over the total token mass.
pub fn reward_ers_ratio<T: Scalar>(graph: &ReasoningGraph, counter: &dyn TokenCounter) -> T {
    if graph.answer_id().is_none() {
        return T::zero();
    }
    let ers = graph.extract_ers();
    let (mut inside, mut total) = (0usize, 0usize);
    for node in graph.nodes() {
        let tokens = counter.count(&node.content);
        total += tokens;
        if ers.contains(&node.id) {
            inside += tokens;
        }
    }
    if total == 0 {
        return T::zero();
    }
    T::from_count(inside) / T::from_count(total)
}

/// 1 when some premise reaches the answer node.
pub fn reward_reachability<T: Scalar>(graph: &ReasoningGraph) -> T {
    if graph.answer_reachable() {
        T::one()
    } else {
        T::zero()
    }
}

/// Share of nodes from which the answer node is reachable (itself included).
pub fn reward_reverse_search<T: Scalar>(graph: &ReasoningGraph) -> T {
    let Some(answer) = graph.answer_id() else { return T::zero() };
    let ancestors = graph.ancestors_of(answer).expect("answer node is in the graph");
    T::from_count(ancestors.len()) / T::from_count(graph.node_count())
}

fn check_components<T: Scalar>(c: &RewardComponents<T>) -> Result<(), RewardError> {
    let named = [
        ("fmt_dens", c.fmt.dens),
        ("fmt_topo", c.fmt.topo),
        ("fmt_para", c.fmt.para),
        ("fmt", c.fmt.total),
        ("conn", c.conn),
        ("ers", c.ers),
        ("reach", c.reach),
        ("rev", c.rev),
    ];
    for (name, v) in named {
        if !v.in_unit_interval() {
            return Err(RewardError::ComponentRange(name));
        }
    }
    Ok(())
}

fn weighted<T: Scalar>(c: &RewardComponents<T>, w: &RewardWeights<T>) -> RewardVector<T> {
    let total = w.fmt * c.fmt.total + w.conn * c.conn + w.ers * c.ers + w.reach * c.reach + w.rev * c.rev;
    RewardVector {
        fmt: c.fmt,
        conn: c.conn,
        ers: c.ers,
        reach: c.reach,
        rev: c.rev,
        // weights may miss 1 by up to the validation tolerance
        total: total.clamp_unit(),
    }
}

/// Weighted total of validated components.
pub fn reward_total<T: Scalar>(
    components: &RewardComponents<T>,
    weights: &RewardWeights<T>,
) -> Result<RewardVector<T>, RewardError> {
    weights.validate()?;
    check_components(components)?;
    Ok(weighted(components, weights))
}

/// All five components of one trace and graph.
pub fn reward_components<T: Scalar>(
    trace: &Trace,
    graph: &ReasoningGraph,
    counter: &dyn TokenCounter,
) -> RewardComponents<T> {
    if graph.is_empty() {
        return RewardVector::zero().components();
    }
    RewardComponents {
        fmt: reward_format(trace, graph),
        conn: reward_connectivity(graph),
        ers: reward_ers_ratio(graph, counter),
        reach: reward_reachability(graph),
        rev: reward_reverse_search(graph),
    }
}

/// Scores a parsed trace. `weights` must already be valid.
pub fn score_trace<T: Scalar>(
    trace: &Trace,
    counter: &dyn TokenCounter,
    weights: &RewardWeights<T>,
) -> RewardVector<T> {
    let graph = build_graph(trace);
    weighted(&reward_components(trace, &graph, counter), weights)
}

/// Rewards of one rollout together with its parse diagnostics.
#[derive(Debug, Clone)]
pub struct ScoredText<T> {
    pub rewards: RewardVector<T>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Parses and scores raw rollout text. In strict mode a rejected trace
/// scores as an empty graph.
pub fn score_text<T: Scalar>(
    text: &str,
    mode: ParseMode,
    counter: &dyn TokenCounter,
    weights: &RewardWeights<T>,
) -> ScoredText<T> {
    let parsed = parse_trace(text, mode);
    let rewards = match &parsed.trace {
        Some(trace) => score_trace(trace, counter, weights),
        None => RewardVector::zero(),
    };
    ScoredText { rewards, diagnostics: parsed.diagnostics }
}
