//! Structural quality control for graph-structured reasoning traces.
//!
//! [`structural_check`] applies the same predicates as the format and
//! reachability rewards, so a trace passes exactly when its format scores are
//! all 1, it has one answer block, and that answer is reachable.
//! [`check_record`] also folds parse diagnostics into violations, for dataset
//! screening of raw text.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{build_graph, ReasoningGraph};
use crate::rewards::intra_block_links;
use crate::trace::{parse_trace, CognitiveLabel, DiagnosticCode, NodeId, ParseMode, Trace};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationCode {
    Density,
    Topology,
    Parallelism,
    DanglingParent,
    DuplicateId,
    UnreachableAnswer,
    MissingAnswer,
    MultiAnswer,
}

impl ViolationCode {
    pub const ALL: [ViolationCode; 8] = [
        ViolationCode::Density,
        ViolationCode::Topology,
        ViolationCode::Parallelism,
        ViolationCode::DanglingParent,
        ViolationCode::DuplicateId,
        ViolationCode::UnreachableAnswer,
        ViolationCode::MissingAnswer,
        ViolationCode::MultiAnswer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::Density => "density",
            ViolationCode::Topology => "topology",
            ViolationCode::Parallelism => "parallelism",
            ViolationCode::DanglingParent => "dangling-parent",
            ViolationCode::DuplicateId => "duplicate-id",
            ViolationCode::UnreachableAnswer => "unreachable-answer",
            ViolationCode::MissingAnswer => "missing-answer",
            ViolationCode::MultiAnswer => "multi-answer",
        }
    }

    /// The rule a violation breaks, phrased for a re-translation prompt.
    pub fn rule(self) -> &'static str {
        match self {
            ViolationCode::Density => "every aggregate or refine block must wrap exactly one node",
            ViolationCode::Topology => {
                "a known node has no parents, an aggregate node has at least two, a refine node has exactly one"
            }
            ViolationCode::Parallelism => "nodes inside one block must not cite each other",
            ViolationCode::DanglingParent => "parents must be ids of distinct nodes declared earlier",
            ViolationCode::DuplicateId => "every node id must be unique",
            ViolationCode::UnreachableAnswer => "the answer must be derivable from the premises through parent links",
            ViolationCode::MissingAnswer => "the trace must end in an answer block",
            ViolationCode::MultiAnswer => "there must be one answer block wrapping one node",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub node_ids: Vec<NodeId>,
    pub message: String,
}

impl Violation {
    fn new(code: ViolationCode, node_ids: Vec<NodeId>, message: String) -> Self {
        Self { code, node_ids, message }
    }
}

/// Node-level input handed to a [`SemanticJudge`].
#[derive(Clone, Debug)]
pub struct JudgeInput<'a> {
    pub node_id: NodeId,
    pub label: CognitiveLabel,
    pub content: &'a str,
    pub parent_contents: Vec<&'a str>,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Verdict {
    pub passed: bool,
    pub reason: String,
}

impl Verdict {
    pub fn pass() -> Self {
        Self { passed: true, reason: String::new() }
    }

    pub fn fail(reason: impl Into<String>) -> Self {
        Self { passed: false, reason: reason.into() }
    }
}

/// Meaning-level check of a node against its label and parents.
pub trait SemanticJudge: Send + Sync {
    fn name(&self) -> &str;
    fn judge(&self, input: &JudgeInput<'_>) -> Verdict;
}

/// Passes every node.
#[derive(Debug, Clone, Copy, Default)]
pub struct PassAllJudge;

impl SemanticJudge for PassAllJudge {
    fn name(&self) -> &str {
        "pass-all"
    }

    fn judge(&self, _: &JudgeInput<'_>) -> Verdict {
        Verdict::pass()
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Judgement {
    pub judge: String,
    pub node_id: NodeId,
    #[serde(flatten)]
    pub verdict: Verdict,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct QcReport {
    pub id: String,
    pub passed: bool,
    pub violations: Vec<Violation>,
    /// Judge verdicts, verbatim. Not part of `passed`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub judgements: Vec<Judgement>,
}

impl QcReport {
    fn from_violations(id: impl Into<String>, violations: Vec<Violation>) -> Self {
        Self { id: id.into(), passed: violations.is_empty(), violations, judgements: Vec::new() }
    }

    /// Structurally clean and no judge objected.
    pub fn accepted(&self) -> bool {
        self.passed && self.judgements.iter().all(|j| j.verdict.passed)
    }

    fn push(&mut self, v: Violation) {
        self.violations.push(v);
        self.passed = false;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QcError {
    #[error("report `{0}` has nothing to fix")]
    NothingToFix(String),
    #[error("translator failed: {0}")]
    Translator(String),
}

fn ids_phrase(ids: &[NodeId]) -> String {
    let list: Vec<String> = ids.iter().map(ToString::to_string).collect();
    match list.len() {
        0 => "the trace".to_owned(),
        1 => format!("node {}", list[0]),
        _ => format!("nodes {}", list.join(", ")),
    }
}

/// Checks a parsed trace. Node ids in violations are ids the trace declares.
pub fn structural_check(id: impl Into<String>, trace: &Trace) -> QcReport {
    let graph = build_graph(trace);
    QcReport::from_violations(id, structural_violations(trace, &graph))
}

fn structural_violations(trace: &Trace, graph: &ReasoningGraph) -> Vec<Violation> {
    use CognitiveLabel::*;
    use ViolationCode as V;

    let mut out = Vec::new();
    let mut declared: HashSet<NodeId> = HashSet::new();
    for block in &trace.blocks {
        if matches!(block.label, Aggregate | Refine) && block.nodes.len() != 1 {
            let ids: Vec<NodeId> = block.nodes.iter().map(|n| n.id).collect();
            let msg = format!("{} block wraps {} nodes", block.label, ids.len());
            out.push(Violation::new(V::Density, ids, msg));
        }
        if block.label.is_reasoning() {
            let links = intra_block_links(block, graph);
            if !links.is_empty() {
                let mut ids = Vec::new();
                for n in &block.nodes {
                    if links.iter().any(|&(p, c)| p == n.id || c == n.id) && !ids.contains(&n.id) {
                        ids.push(n.id);
                    }
                }
                let pairs: Vec<String> = links.iter().map(|(p, c)| format!("{p}->{c}")).collect();
                let msg = format!("{} block has internal links {}", block.label, pairs.join(", "));
                out.push(Violation::new(V::Parallelism, ids, msg));
            }
        }
        for node in &block.nodes {
            if !declared.insert(node.id) {
                out.push(Violation::new(V::DuplicateId, vec![node.id], format!("id {} is declared again", node.id)));
                continue;
            }
            let bad: Vec<String> = node
                .parents
                .iter()
                .filter(|&&p| p == node.id || !declared.contains(&p))
                .map(ToString::to_string)
                .collect();
            if !bad.is_empty() {
                let msg = format!("cites {} which is not an earlier node", bad.join(", "));
                out.push(Violation::new(V::DanglingParent, vec![node.id], msg));
            }
            let in_degree = graph.node(node.id).map_or(0, |g| g.in_degree());
            let ok = match block.label {
                Known => in_degree == 0,
                Aggregate => in_degree > 1,
                Refine => in_degree == 1,
                _ => true,
            };
            if !ok {
                let msg = format!("{} node has {} parents", block.label, in_degree);
                out.push(Violation::new(V::Topology, vec![node.id], msg));
            }
        }
    }

    let answer_blocks: Vec<&_> = trace.blocks.iter().filter(|b| b.label == Answer).collect();
    match answer_blocks.len() {
        0 => out.push(Violation::new(V::MissingAnswer, Vec::new(), "no answer block".into())),
        1 => {}
        n => {
            let ids = answer_blocks.iter().filter_map(|b| b.nodes.last()).map(|n| n.id).collect();
            out.push(Violation::new(V::MultiAnswer, ids, format!("{n} answer blocks")));
        }
    }
    if !answer_blocks.is_empty() && !graph.answer_reachable() {
        let ids = graph.answer_id().into_iter().collect();
        out.push(Violation::new(V::UnreachableAnswer, ids, "no premise reaches the answer".into()));
    }
    out
}

/// Screens raw trace text: the structural check of the repaired trace plus
/// violations for parse defects the repair hid. The text is always parsed
/// leniently so defects can be located.
pub fn check_record(id: impl Into<String>, text: &str) -> QcReport {
    use ViolationCode as V;

    let parsed = parse_trace(text, ParseMode::Lenient);
    let trace = parsed.trace.unwrap_or_default();
    let mut report = structural_check(id, &trace);
    for d in &parsed.diagnostics {
        let code = match d.code {
            DiagnosticCode::DanglingParent | DiagnosticCode::ForwardParent | DiagnosticCode::SelfParent => {
                V::DanglingParent
            }
            DiagnosticCode::DuplicateId => V::DuplicateId,
            DiagnosticCode::AnswerMultiNode => V::MultiAnswer,
            // already reported from the block count
            DiagnosticCode::MultipleAnswers => continue,
            _ => continue,
        };
        let ids = d.node_id.filter(|&n| trace.contains(n)).into_iter().collect();
        report.push(Violation::new(code, ids, d.message.clone()));
    }
    report
}

/// Runs `judge` on every node of `trace` and records the verdicts.
pub fn apply_judge(report: &mut QcReport, trace: &Trace, judge: &dyn SemanticJudge) {
    let mut contents: BTreeMap<NodeId, &str> = BTreeMap::new();
    for (_, n) in trace.labeled_nodes() {
        contents.entry(n.id).or_insert(&n.content);
    }
    for (label, node) in trace.labeled_nodes() {
        let input = JudgeInput {
            node_id: node.id,
            label,
            content: &node.content,
            parent_contents: node.parents.iter().filter_map(|p| contents.get(p).copied()).collect(),
        };
        report.judgements.push(Judgement { judge: judge.name().to_owned(), node_id: node.id, verdict: judge.judge(&input) });
    }
}

/// Numbered fix list for a re-translation prompt: one item per violation in
/// report order, then one per failed judgement.
pub fn refinement_feedback(report: &QcReport) -> Result<String, QcError> {
    if report.accepted() {
        return Err(QcError::NothingToFix(report.id.clone()));
    }
    let mut out = String::from("The reasoning graph failed verification. Fix each item below and translate again.\n");
    let mut k = 0;
    for v in &report.violations {
        k += 1;
        out.push_str(&format!("{k}. {}: {} violation. Rule: {}.\n", ids_phrase(&v.node_ids), v.code, v.code.rule()));
    }
    for j in report.judgements.iter().filter(|j| !j.verdict.passed) {
        k += 1;
        out.push_str(&format!("{k}. {}: rejected by {}. Reason: {}\n", ids_phrase(&[j.node_id]), j.judge, j.verdict.reason));
    }
    Ok(out)
}

/// Produces graph-format text from source reasoning, optionally guided by
/// feedback on the previous attempt.
pub trait Translator {
    fn translate(&mut self, source: &str, feedback: Option<&str>) -> Result<String, String>;
}

impl<F> Translator for F
where
    F: FnMut(&str, Option<&str>) -> Result<String, String>,
{
    fn translate(&mut self, source: &str, feedback: Option<&str>) -> Result<String, String> {
        self(source, feedback)
    }
}

#[derive(Clone, Debug)]
pub struct RefineOutcome {
    pub trace_text: String,
    pub report: QcReport,
    /// Translations performed, at most `1 + max_retries`.
    pub attempts: usize,
}

impl RefineOutcome {
    pub fn accepted(&self) -> bool {
        self.report.accepted()
    }
}

/// Translate, verify, and re-translate with feedback until the result is
/// accepted or `max_retries` re-translations have been spent.
pub fn refine(
    id: &str,
    source: &str,
    translator: &mut dyn Translator,
    judge: &dyn SemanticJudge,
    max_retries: usize,
) -> Result<RefineOutcome, QcError> {
    let mut feedback: Option<String> = None;
    let mut attempts = 0;
    loop {
        let text = translator.translate(source, feedback.as_deref()).map_err(QcError::Translator)?;
        attempts += 1;
        let mut report = check_record(id, &text);
        if let Some(trace) = parse_trace(&text, ParseMode::Lenient).trace {
            apply_judge(&mut report, &trace, judge);
        }
        if report.accepted() || attempts > max_retries {
            return Ok(RefineOutcome { trace_text: text, report, attempts });
        }
        feedback = Some(refinement_feedback(&report)?);
    }
}

/// Aggregate counts over a batch of reports.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct QcSummary {
    pub records: usize,
    pub passed: usize,
    /// `passed / records`; absent for an empty batch.
    pub pass_rate: Option<f64>,
    /// Violations per code, every code listed.
    pub violations: BTreeMap<String, usize>,
}

impl QcSummary {
    pub fn from_reports<'a>(reports: impl IntoIterator<Item = &'a QcReport>) -> Self {
        let mut violations: BTreeMap<String, usize> = ViolationCode::ALL.iter().map(|c| (c.as_str().to_owned(), 0)).collect();
        let (mut records, mut passed) = (0, 0);
        for r in reports {
            records += 1;
            passed += usize::from(r.passed);
            for v in &r.violations {
                *violations.get_mut(v.code.as_str()).expect("closed code set") += 1;
            }
        }
        let pass_rate = (records > 0).then(|| passed as f64 / records as f64);
        Self { records, passed, pass_rate, violations }
    }
}
