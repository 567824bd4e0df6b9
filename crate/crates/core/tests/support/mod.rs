//! Seeded generators and brute-force reference implementations shared by
//! the integration and acceptance tests.
#![allow(dead_code)]

use grp_core::trace::{ReasoningNode, TagBlock};
use grp_core::{build_graph, serialize_trace, CognitiveLabel, NodeId, NodeSet, Trace};
use rand::seq::index::sample;
use rand::Rng;

pub use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as TestRng;

pub fn rng(seed: u64) -> TestRng {
    TestRng::seed_from_u64(seed)
}

const REASONING: [CognitiveLabel; 7] = [
    CognitiveLabel::Known,
    CognitiveLabel::Generate,
    CognitiveLabel::Aggregate,
    CognitiveLabel::Reflect,
    CognitiveLabel::Refine,
    CognitiveLabel::Reverse,
    CognitiveLabel::Associate,
];

const WORDS: [&str; 22] = [
    "x", "y", "=", "+", "2", "3.5", "a<b", "b>a", "é", "∑", "then", "so", "<", ">", "&", "\"q\"", "'", "x<=y", "42",
    "ok.", "→", "tab\there",
];

fn content(rng: &mut impl Rng) -> String {
    let line = |rng: &mut dyn rand::RngCore| {
        let k = rng.random_range(1..=5);
        (0..k).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
    };
    let first = line(rng);
    if rng.random_bool(0.1) {
        format!("{first}\n{}", line(rng))
    } else {
        first
    }
}

fn pick_parents(rng: &mut impl Rng, declared: &[u32], max: usize) -> Vec<NodeId> {
    let k = rng.random_range(0..=max.min(declared.len()));
    sample(rng, declared.len(), k).into_iter().map(|i| NodeId(declared[i])).collect()
}

/// A random trace satisfying every `Trace` invariant, with at most
/// `max_nodes` nodes and ids that need not be consecutive.
pub fn random_trace(rng: &mut impl Rng, max_nodes: usize) -> Trace {
    let n = rng.random_range(1..=max_nodes.max(1));
    let with_answer = rng.random_bool(0.85);
    let mut remaining = if with_answer { n - 1 } else { n };
    let mut declared: Vec<u32> = Vec::new();
    let mut next = rng.random_range(1..=3u32);
    let mut blocks = Vec::new();
    while remaining > 0 {
        let k = rng.random_range(1..=remaining.min(3));
        remaining -= k;
        let label = REASONING[rng.random_range(0..REASONING.len())];
        let mut nodes = Vec::new();
        for _ in 0..k {
            let parents = pick_parents(rng, &declared, 3);
            nodes.push(ReasoningNode { id: NodeId(next), parents, content: content(rng) });
            declared.push(next);
            next += rng.random_range(1..=3);
        }
        blocks.push(TagBlock::new(label, nodes));
    }
    let mut answer_node_id = None;
    if with_answer {
        let parents = pick_parents(rng, &declared, 3);
        blocks.push(TagBlock::new(
            CognitiveLabel::Answer,
            vec![ReasoningNode { id: NodeId(next), parents, content: content(rng) }],
        ));
        answer_node_id = Some(NodeId(next));
    }
    Trace { blocks, answer_node_id }
}

const SNIPPETS: [&str; 16] = [
    "<node id=\"9\" parents=\"\">", "</node>", "<known>", "</known>", "<answer>", "</answer>", "<aggregate>",
    "parents=\"1,1\"", "id=\"0\"", "<think>", "</refine>", "<", ">", "\"", "\n", "<node",
];

/// Applies one to three random edits: deletions, snippet insertions, digit
/// swaps and truncation.
pub fn mutate(rng: &mut impl Rng, text: &str) -> String {
    let mut chars: Vec<char> = text.chars().collect();
    for _ in 0..rng.random_range(1..=3) {
        let len = chars.len();
        match rng.random_range(0..4) {
            0 if len > 0 => {
                let a = rng.random_range(0..len);
                let b = rng.random_range(a..=len.min(a + 20));
                chars.drain(a..b);
            }
            1 => {
                let at = rng.random_range(0..=len);
                let s = SNIPPETS[rng.random_range(0..SNIPPETS.len())];
                chars.splice(at..at, s.chars());
            }
            2 => {
                let digits: Vec<usize> = (0..len).filter(|&i| chars[i].is_ascii_digit()).collect();
                if !digits.is_empty() {
                    let i = digits[rng.random_range(0..digits.len())];
                    chars[i] = char::from(b'0' + rng.random_range(0..10u8));
                }
            }
            _ if len > 0 => chars.truncate(rng.random_range(0..len)),
            _ => {}
        }
    }
    chars.into_iter().collect()
}

pub fn prose(rng: &mut impl Rng) -> String {
    let k = rng.random_range(0..30);
    (0..k).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
}

/// Rollout text for fuzzing: a third valid, a third mutated, a third prose.
pub fn fuzz_text(rng: &mut impl Rng) -> String {
    match rng.random_range(0..3) {
        0 => serialize_trace(&random_trace(rng, 12)).expect("generated traces are valid"),
        1 => {
            let valid = serialize_trace(&random_trace(rng, 12)).expect("generated traces are valid");
            mutate(rng, &valid)
        }
        _ => prose(rng),
    }
}

/// A DAG on nodes `0..n` as `(parent, child)` pairs with `parent < child`.
#[derive(Clone, Debug)]
pub struct Dag {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

impl Dag {
    pub fn pairs(n: usize) -> Vec<(usize, usize)> {
        (0..n).flat_map(|c| (0..c).map(move |p| (p, c))).collect()
    }

    /// The DAG selecting the pairs whose bit is set in `mask`.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        let edges = Self::pairs(n).into_iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, e)| e).collect();
        Self { n, edges }
    }

    pub fn random(rng: &mut impl Rng, max_n: usize) -> Self {
        let n = rng.random_range(1..=max_n);
        let p: f64 = rng.random_range(0.05..0.6);
        let edges = Self::pairs(n).into_iter().filter(|_| rng.random_bool(p)).collect();
        Self { n, edges }
    }

    /// One node per block; node `i` has id `i + 1`, and the answer node sits
    /// in an answer block.
    pub fn to_trace(&self, answer: Option<usize>) -> Trace {
        let blocks = (0..self.n)
            .map(|c| {
                let parents: Vec<u32> = self.edges.iter().filter(|e| e.1 == c).map(|e| e.0 as u32 + 1).collect();
                let label = if Some(c) == answer { CognitiveLabel::Answer } else { CognitiveLabel::Generate };
                TagBlock::new(label, vec![ReasoningNode::new(c as u32 + 1, &parents, format!("step {c}"))])
            })
            .collect();
        Trace { blocks, answer_node_id: answer.map(|a| NodeId(a as u32 + 1)) }
    }

    /// Reflexive transitive closure, composing paths until a fixed point.
    pub fn closure(&self) -> Vec<Vec<bool>> {
        let n = self.n;
        let mut r = vec![vec![false; n]; n];
        for i in 0..n {
            r[i][i] = true;
        }
        for &(p, c) in &self.edges {
            r[p][c] = true;
        }
        loop {
            let mut changed = false;
            for i in 0..n {
                for j in 0..n {
                    if !r[i][j] && (0..n).any(|k| r[i][k] && r[k][j]) {
                        r[i][j] = true;
                        changed = true;
                    }
                }
            }
            if !changed {
                return r;
            }
        }
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|e| e.1 == v).count()
    }
}

/// Union-find component count, edges taken as undirected.
pub fn components(n: usize, edges: &[(usize, usize)]) -> usize {
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut x = x;
        while p[x] != r {
            let next = p[x];
            p[x] = r;
            x = next;
        }
        r
    }
    let mut parent: Vec<usize> = (0..n).collect();
    let mut count = n;
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            count -= 1;
        }
    }
    count
}

/// Nodes on some path from a parentless non-answer node to the answer.
pub fn brute_ers(dag: &Dag, closure: &[Vec<bool>], answer: usize) -> Vec<usize> {
    let sources: Vec<usize> = (0..dag.n).filter(|&s| s != answer && dag.in_degree(s) == 0).collect();
    (0..dag.n)
        .filter(|&v| closure[v][answer] && sources.iter().any(|&s| closure[s][v]))
        .collect()
}

pub fn brute_ancestors(closure: &[Vec<bool>], target: usize) -> Vec<usize> {
    (0..closure.len()).filter(|&v| closure[v][target]).collect()
}

pub fn ids(indices: &[usize]) -> Vec<NodeId> {
    indices.iter().map(|&i| NodeId(i as u32 + 1)).collect()
}

fn set(indices: &[usize]) -> NodeSet {
    ids(indices).into_iter().collect()
}

/// Compares the graph algorithms with the brute-force answers for every
/// choice of answer node (including none).
pub fn check_dag(dag: &Dag) -> Result<(), String> {
    let closure = dag.closure();
    let expected_components = components(dag.n, &dag.edges);
    for answer in std::iter::once(None).chain((0..dag.n).map(Some)) {
        let g = build_graph(&dag.to_trace(answer));
        if g.component_count() != Ok(expected_components) {
            return Err(format!("{dag:?}: components {:?} != {expected_components}", g.component_count()));
        }
        for v in 0..dag.n {
            let got = g.ancestors_of(ids(&[v])[0]).unwrap();
            if got != set(&brute_ancestors(&closure, v)) {
                return Err(format!("{dag:?}: ancestors of {v}"));
            }
        }
        let want_ers = answer.map(|a| set(&brute_ers(dag, &closure, a))).unwrap_or_default();
        if g.extract_ers() != want_ers {
            return Err(format!("{dag:?} answer {answer:?}: ers {:?} != {want_ers:?}", g.extract_ers()));
        }
        let reachable = answer.is_some_and(|a| want_ers.contains(&ids(&[a])[0]));
        if g.answer_reachable() != reachable {
            return Err(format!("{dag:?} answer {answer:?}: reachability"));
        }
    }
    Ok(())
}
