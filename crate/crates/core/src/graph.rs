//! Directed reasoning graph induced by a trace's parent lists.
//!
//! Edges run parent → child. Because parents must be declared before their
//! children, the graph is acyclic and declaration order is a topological order.
//! The virtual source attaches to every parentless node other than the answer
//! node; the virtual sink is the answer node.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Write;

use thiserror::Error;

use crate::trace::{CognitiveLabel, Diagnostic, NodeId, Trace};

pub type NodeSet = BTreeSet<NodeId>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("graph has no nodes")]
    Empty,
    #[error("node {0} is not in the graph")]
    UnknownNode(NodeId),
}

#[derive(Debug, Clone)]
pub struct GraphNode {
    pub id: NodeId,
    pub label: CognitiveLabel,
    pub content: String,
    parents: Vec<usize>,
    children: Vec<usize>,
}

impl GraphNode {
    pub fn in_degree(&self) -> usize {
        self.parents.len()
    }

    pub fn out_degree(&self) -> usize {
        self.children.len()
    }
}

#[derive(Debug, Clone, Default)]
pub struct ReasoningGraph {
    nodes: Vec<GraphNode>,
    index: HashMap<NodeId, usize>,
    answer: Option<usize>,
    diagnostics: Vec<Diagnostic>,
}

/// Builds the graph for a trace.
///
/// Parent references that do not resolve to an earlier node, self references
/// and repeated ids are skipped, so any `Trace` value yields an acyclic graph.
pub fn build_graph(trace: &Trace) -> ReasoningGraph {
    let mut graph = ReasoningGraph::default();
    for (label, node) in trace.labeled_nodes() {
        if graph.index.contains_key(&node.id) {
            continue;
        }
        let idx = graph.nodes.len();
        let mut parents: Vec<usize> = Vec::with_capacity(node.parents.len());
        for p in &node.parents {
            if let Some(&pi) = graph.index.get(p) {
                if !parents.contains(&pi) {
                    parents.push(pi);
                }
            }
        }
        for &pi in &parents {
            graph.nodes[pi].children.push(idx);
        }
        graph.nodes.push(GraphNode {
            id: node.id,
            label,
            content: node.content.clone(),
            parents,
            children: Vec::new(),
        });
        graph.index.insert(node.id, idx);
    }
    graph.answer = trace.answer_node_id.and_then(|id| graph.index.get(&id).copied());
    graph
}

impl ReasoningGraph {
    /// Attaches parse diagnostics to the graph.
    pub fn with_diagnostics(mut self, diagnostics: Vec<Diagnostic>) -> Self {
        self.diagnostics = diagnostics;
        self
    }

    pub fn diagnostics(&self) -> &[Diagnostic] {
        &self.diagnostics
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.nodes.iter().map(|n| n.parents.len()).sum()
    }

    /// Nodes in declaration (topological) order.
    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Option<&GraphNode> {
        self.index.get(&id).map(|&i| &self.nodes[i])
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn parents_of(&self, id: NodeId) -> Option<impl Iterator<Item = NodeId> + '_> {
        self.node(id).map(|n| n.parents.iter().map(|&p| self.nodes[p].id))
    }

    pub fn children_of(&self, id: NodeId) -> Option<impl Iterator<Item = NodeId> + '_> {
        self.node(id).map(|n| n.children.iter().map(|&c| self.nodes[c].id))
    }

    /// All `(parent, child)` edges, grouped by child in declaration order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes
            .iter()
            .flat_map(move |n| n.parents.iter().map(move |&p| (self.nodes[p].id, n.id)))
    }

    pub fn answer_id(&self) -> Option<NodeId> {
        self.answer.map(|i| self.nodes[i].id)
    }

    /// Nodes without parents.
    pub fn premise_set(&self) -> NodeSet {
        self.nodes.iter().filter(|n| n.parents.is_empty()).map(|n| n.id).collect()
    }

    /// Attachment points of the virtual source: parentless nodes other than
    /// the answer node, which cannot serve as its own premise.
    fn source_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(move |&i| self.nodes[i].parents.is_empty() && Some(i) != self.answer)
    }

    /// Number of weakly connected components.
    pub fn component_count(&self) -> Result<usize, GraphError> {
        if self.nodes.is_empty() {
            return Err(GraphError::Empty);
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.nodes.len() {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(i) = stack.pop() {
                let n = &self.nodes[i];
                for &j in n.parents.iter().chain(&n.children) {
                    if !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        Ok(count)
    }

    fn walk(&self, starts: impl IntoIterator<Item = usize>, backward: bool) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack: Vec<usize> = Vec::new();
        for s in starts {
            if !seen[s] {
                seen[s] = true;
                stack.push(s);
            }
        }
        while let Some(i) = stack.pop() {
            let next = if backward { &self.nodes[i].parents } else { &self.nodes[i].children };
            for &j in next {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen
    }

    fn to_set(&self, mask: &[bool]) -> NodeSet {
        mask.iter()
            .zip(&self.nodes)
            .filter(|(&m, _)| m)
            .map(|(_, n)| n.id)
            .collect()
    }

    /// Every node with a directed path to `target`, including `target`.
    pub fn ancestors_of(&self, target: NodeId) -> Result<NodeSet, GraphError> {
        let &t = self.index.get(&target).ok_or(GraphError::UnknownNode(target))?;
        Ok(self.to_set(&self.walk([t], true)))
    }

    /// Every node reachable from the virtual source.
    pub fn reachable_from_premises(&self) -> NodeSet {
        self.to_set(&self.walk(self.source_indices(), false))
    }

    /// Effective reasoning subgraph: nodes lying on some path from the virtual
    /// source to the answer. Empty when there is no answer node.
    pub fn extract_ers(&self) -> NodeSet {
        let Some(answer) = self.answer else { return NodeSet::new() };
        let forward = self.walk(self.source_indices(), false);
        let backward = self.walk([answer], true);
        let both: Vec<bool> = forward.iter().zip(&backward).map(|(&f, &b)| f && b).collect();
        self.to_set(&both)
    }

    /// Whether some premise reaches the answer node.
    pub fn answer_reachable(&self) -> bool {
        let Some(answer) = self.answer else { return false };
        self.walk(self.source_indices(), false)[answer]
    }

    /// Length in edges of the shortest premise-to-answer path. Diagnostic
    /// statistic only; rewards use reachability.
    pub fn shortest_premise_path(&self) -> Option<usize> {
        let answer = self.answer?;
        let mut dist = vec![usize::MAX; self.nodes.len()];
        let mut queue = VecDeque::new();
        for s in self.source_indices() {
            dist[s] = 0;
            queue.push_back(s);
        }
        while let Some(i) = queue.pop_front() {
            if i == answer {
                return Some(dist[i]);
            }
            for &j in &self.nodes[i].children {
                if dist[j] == usize::MAX {
                    dist[j] = dist[i] + 1;
                    queue.push_back(j);
                }
            }
        }
        None
    }

    /// One `parent child` pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (p, c) in self.edges() {
            let _ = writeln!(out, "{p} {c}");
        }
        out
    }

    /// Graphviz rendering with the cognitive label as a node attribute.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph reasoning {\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let shape = if Some(i) == self.answer { ", shape=doublecircle" } else { "" };
            let _ = writeln!(
                out,
                "  n{} [label=\"{}: {}\", tag=\"{}\"{shape}];",
                n.id,
                n.id,
                dot_escape(&n.content),
                n.label
            );
        }
        for (p, c) in self.edges() {
            let _ = writeln!(out, "  n{p} -> n{c};");
        }
        out.push_str("}\n");
        out
    }
}

fn dot_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => {}
            c => out.push(c),
        }
    }
    out
}
