//! The textual trace format: tag blocks wrapping `<node>` elements.
//!
//! ```text
//! <known>
//! <node id="1" parents="">x = 2</node>
//! </known>
//! <answer>
//! <node id="2" parents="1">x = 2</node>
//! </answer>
//! ```

mod diagnostic;
mod lex;
mod lint;
mod parse;
mod serialize;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use diagnostic::{Diagnostic, DiagnosticCode, Severity};
pub use lint::lint_trace;
pub use parse::{parse_trace, ParseMode, Parsed};
pub use serialize::serialize_trace;

/// Identifier of a reasoning node. Always positive.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Step-level cognitive label of a tag block, plus the answer block kind.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CognitiveLabel {
    Known,
    Generate,
    Aggregate,
    Reflect,
    Refine,
    Reverse,
    Associate,
    Answer,
}

impl CognitiveLabel {
    pub const ALL: [CognitiveLabel; 8] = [
        CognitiveLabel::Known,
        CognitiveLabel::Generate,
        CognitiveLabel::Aggregate,
        CognitiveLabel::Reflect,
        CognitiveLabel::Refine,
        CognitiveLabel::Reverse,
        CognitiveLabel::Associate,
        CognitiveLabel::Answer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CognitiveLabel::Known => "known",
            CognitiveLabel::Generate => "generate",
            CognitiveLabel::Aggregate => "aggregate",
            CognitiveLabel::Reflect => "reflect",
            CognitiveLabel::Refine => "refine",
            CognitiveLabel::Reverse => "reverse",
            CognitiveLabel::Associate => "associate",
            CognitiveLabel::Answer => "answer",
        }
    }

    /// Exact, case-sensitive lookup of a tag name.
    pub fn from_tag(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.as_str() == name)
    }

    /// `true` for the seven reasoning labels, `false` for the answer block.
    pub fn is_reasoning(self) -> bool {
        self != CognitiveLabel::Answer
    }
}

impl fmt::Display for CognitiveLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One reasoning step: `(id, parents, content)`.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ReasoningNode {
    pub id: NodeId,
    pub parents: Vec<NodeId>,
    pub content: String,
}

impl ReasoningNode {
    pub fn new(id: u32, parents: &[u32], content: impl Into<String>) -> Self {
        Self {
            id: NodeId(id),
            parents: parents.iter().copied().map(NodeId).collect(),
            content: content.into(),
        }
    }
}

/// One tag instance wrapping one or more nodes.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct TagBlock {
    pub label: CognitiveLabel,
    pub nodes: Vec<ReasoningNode>,
}

impl TagBlock {
    pub fn new(label: CognitiveLabel, nodes: Vec<ReasoningNode>) -> Self {
        Self { label, nodes }
    }
}

/// Parsed rollout: blocks in declaration order plus the designated answer node.
///
/// The JSON form of this type (`{"blocks": [...], "answer_node_id": ...}`) is
/// the interchange mirror of the tag grammar.
#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct Trace {
    pub blocks: Vec<TagBlock>,
    pub answer_node_id: Option<NodeId>,
}

/// Broken [`Trace`] invariant.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("block {block} ({label}) wraps no nodes")]
    EmptyBlock { block: usize, label: CognitiveLabel },
    #[error("node id 0 is not a positive integer")]
    ZeroId,
    #[error("node {0} is declared more than once")]
    DuplicateId(NodeId),
    #[error("node {node} cites parent {parent} which is not declared before it")]
    UnresolvedParent { node: NodeId, parent: NodeId },
    #[error("node {0} lists itself as a parent")]
    SelfParent(NodeId),
    #[error("node {node} lists parent {parent} more than once")]
    DuplicateParent { node: NodeId, parent: NodeId },
    #[error("node {0} has content that is empty, padded with whitespace, or contains markup")]
    UnrepresentableContent(NodeId),
    #[error("trace has {0} answer blocks")]
    MultipleAnswers(usize),
    #[error("answer block wraps {0} nodes")]
    AnswerArity(usize),
    #[error("answer_node_id {declared:?} does not match the answer block node {actual:?}")]
    AnswerMismatch { declared: Option<NodeId>, actual: Option<NodeId> },
}

impl Trace {
    /// All nodes with their block label, in declaration order.
    pub fn labeled_nodes(&self) -> impl Iterator<Item = (CognitiveLabel, &ReasoningNode)> {
        self.blocks
            .iter()
            .flat_map(|b| b.nodes.iter().map(move |n| (b.label, n)))
    }

    pub fn node_count(&self) -> usize {
        self.blocks.iter().map(|b| b.nodes.len()).sum()
    }

    pub fn answer_block_count(&self) -> usize {
        self.blocks
            .iter()
            .filter(|b| b.label == CognitiveLabel::Answer)
            .count()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.labeled_nodes().any(|(_, n)| n.id == id)
    }

    /// Checks every invariant a strictly parsed trace satisfies.
    pub fn validate(&self) -> Result<(), TraceError> {
        let mut declared = HashSet::new();
        for (i, block) in self.blocks.iter().enumerate() {
            if block.nodes.is_empty() {
                return Err(TraceError::EmptyBlock { block: i, label: block.label });
            }
            for node in &block.nodes {
                if node.id.0 == 0 {
                    return Err(TraceError::ZeroId);
                }
                if declared.contains(&node.id) {
                    return Err(TraceError::DuplicateId(node.id));
                }
                let mut seen = HashSet::new();
                for &p in &node.parents {
                    if p == node.id {
                        return Err(TraceError::SelfParent(node.id));
                    }
                    if !declared.contains(&p) {
                        return Err(TraceError::UnresolvedParent { node: node.id, parent: p });
                    }
                    if !seen.insert(p) {
                        return Err(TraceError::DuplicateParent { node: node.id, parent: p });
                    }
                }
                if !lex::is_representable_content(&node.content) {
                    return Err(TraceError::UnrepresentableContent(node.id));
                }
                declared.insert(node.id);
            }
        }
        let answers: Vec<&TagBlock> = self
            .blocks
            .iter()
            .filter(|b| b.label == CognitiveLabel::Answer)
            .collect();
        if answers.len() > 1 {
            return Err(TraceError::MultipleAnswers(answers.len()));
        }
        let actual = match answers.first() {
            Some(b) if b.nodes.len() != 1 => return Err(TraceError::AnswerArity(b.nodes.len())),
            Some(b) => Some(b.nodes[0].id),
            None => None,
        };
        if actual != self.answer_node_id {
            return Err(TraceError::AnswerMismatch { declared: self.answer_node_id, actual });
        }
        Ok(())
    }

    /// Serializes the JSON mirror.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
