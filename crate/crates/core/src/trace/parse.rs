use std::collections::{BTreeMap, HashSet};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::lex::{next_tag, parse_attrs, Tag};
use super::{CognitiveLabel, Diagnostic, DiagnosticCode, NodeId, ReasoningNode, Severity, TagBlock, Trace};

/// How the parser reacts to malformed input.
///
/// Both modes detect the same defects. Strict reports them as errors and
/// refuses to build a trace; lenient reports them as warnings, repairs what
/// it can (dropping bad edges, nodes and blocks) and always returns a trace.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseMode {
    Strict,
    #[default]
    Lenient,
}

impl std::str::FromStr for ParseMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict" => Ok(ParseMode::Strict),
            "lenient" => Ok(ParseMode::Lenient),
            other => Err(format!("unknown parse mode `{other}` (expected strict or lenient)")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Parsed {
    /// `None` only in strict mode when an error was found.
    pub trace: Option<Trace>,
    pub diagnostics: Vec<Diagnostic>,
    /// Source span of every node kept in the trace.
    pub node_spans: BTreeMap<NodeId, Range<usize>>,
    /// Source span of every block kept in the trace, aligned with `trace.blocks`.
    pub block_spans: Vec<Range<usize>>,
}

impl Parsed {
    pub fn has_errors(&self) -> bool {
        self.diagnostics.iter().any(Diagnostic::is_error)
    }

    /// The parsed trace, or an empty one when strict parsing failed.
    pub fn trace_or_empty(self) -> Trace {
        self.trace.unwrap_or_default()
    }
}

struct RawNode {
    id: Option<u32>,
    parents: Vec<u32>,
    content: String,
    tag_span: Range<usize>,
    span: Range<usize>,
}

struct RawBlock {
    label: CognitiveLabel,
    nodes: Vec<RawNode>,
    span: Range<usize>,
}

struct Parser<'a> {
    src: &'a str,
    severity: Severity,
    diagnostics: Vec<Diagnostic>,
}

/// Parses rollout text into a [`Trace`].
pub fn parse_trace(text: &str, mode: ParseMode) -> Parsed {
    let severity = match mode {
        ParseMode::Strict => Severity::Error,
        ParseMode::Lenient => Severity::Warning,
    };
    let mut parser = Parser { src: text, severity, diagnostics: Vec::new() };
    let raw = parser.scan();
    let (trace, node_spans, block_spans) = parser.resolve(raw);
    let trace = match mode {
        ParseMode::Strict if !parser.diagnostics.is_empty() => None,
        _ => Some(trace),
    };
    Parsed { trace, diagnostics: parser.diagnostics, node_spans, block_spans }
}

impl<'a> Parser<'a> {
    fn emit(&mut self, code: DiagnosticCode, node_id: Option<NodeId>, span: Range<usize>, message: String) {
        debug_assert!(span.start <= span.end && span.end <= self.src.len());
        self.diagnostics.push(Diagnostic { severity: self.severity, code, node_id, message, byte_span: span });
    }

    fn text(&mut self, range: Range<usize>, inside: Option<CognitiveLabel>) {
        let slice = &self.src[range.clone()];
        let trimmed = slice.trim_start();
        if trimmed.is_empty() {
            return;
        }
        let start = range.start + (slice.len() - trimmed.len());
        let end = start + trimmed.trim_end().len();
        let message = match inside {
            Some(label) => format!("text outside any node inside <{label}> block"),
            None => "text outside any tag block".to_string(),
        };
        self.emit(DiagnosticCode::StrayText, None, start..end, message);
    }

    fn scan(&mut self) -> Vec<RawBlock> {
        let src = self.src;
        let mut blocks = Vec::new();
        let mut open: Option<RawBlock> = None;
        let mut pos = 0;
        while pos < src.len() {
            let Some((p, tag)) = next_tag(src, pos) else {
                self.text(pos..src.len(), open.as_ref().map(|b| b.label));
                break;
            };
            self.text(pos..p, open.as_ref().map(|b| b.label));
            pos = tag.span.1;

            if tag.name == "node" {
                if tag.closing {
                    self.emit(DiagnosticCode::StrayClose, None, tag.range(), "`</node>` without an open node".into());
                    continue;
                }
                let (node, next) = self.node(&tag);
                pos = next;
                match open.as_mut() {
                    Some(block) => block.nodes.push(node),
                    None => {
                        let id = node.id.map(NodeId);
                        self.emit(
                            DiagnosticCode::NodeOutsideBlock,
                            id,
                            node.span,
                            "node is not wrapped by a tag block; dropped".into(),
                        );
                    }
                }
                continue;
            }

            let Some(label) = CognitiveLabel::from_tag(tag.name) else {
                let slash = if tag.closing { "/" } else { "" };
                self.emit(DiagnosticCode::UnknownTag, None, tag.range(), format!("unknown tag `<{slash}{}>`", tag.name));
                continue;
            };

            if tag.closing {
                match open.take() {
                    Some(mut block) => {
                        if block.label != label {
                            self.emit(
                                DiagnosticCode::MismatchedClose,
                                None,
                                tag.range(),
                                format!("`</{label}>` closes a <{}> block", block.label),
                            );
                        }
                        block.span.end = tag.span.1;
                        blocks.push(block);
                    }
                    None => {
                        self.emit(DiagnosticCode::StrayClose, None, tag.range(), format!("`</{label}>` without an open block"));
                    }
                }
                continue;
            }

            if !tag.attrs.trim().is_empty() {
                self.emit(
                    DiagnosticCode::BadAttribute,
                    None,
                    tag.attrs_start..tag.span.1 - 1,
                    format!("<{label}> takes no attributes"),
                );
            }
            if let Some(mut block) = open.take() {
                self.emit(
                    DiagnosticCode::UnclosedTag,
                    None,
                    block.span.start..p,
                    format!("<{}> block is not closed before <{label}>", block.label),
                );
                block.span.end = p;
                blocks.push(block);
            }
            open = Some(RawBlock { label, nodes: Vec::new(), span: p..tag.span.1 });
        }
        if let Some(mut block) = open {
            self.emit(
                DiagnosticCode::UnclosedTag,
                None,
                block.span.start..src.len(),
                format!("<{}> block is not closed", block.label),
            );
            block.span.end = src.len();
            blocks.push(block);
        }
        blocks
    }

    /// Reads one node starting at its opening tag; returns the node and the
    /// offset where scanning resumes.
    fn node(&mut self, tag: &Tag<'a>) -> (RawNode, usize) {
        let src = self.src;
        let (attrs, bad) = parse_attrs(tag.attrs, tag.attrs_start);
        if let Some(span) = bad {
            self.emit(DiagnosticCode::BadAttribute, None, span, "malformed attribute list".into());
        }

        let mut id = None;
        let mut parents_attr = None;
        for attr in &attrs {
            match attr.name {
                "id" if id.is_none() => match parse_positive(attr.value) {
                    Some(v) => id = Some((v, attr.span.clone())),
                    None => self.emit(
                        DiagnosticCode::BadAttribute,
                        None,
                        attr.span.clone(),
                        format!("node id `{}` is not a positive integer", attr.value),
                    ),
                },
                "parents" if parents_attr.is_none() => parents_attr = Some(attr),
                other => self.emit(
                    DiagnosticCode::BadAttribute,
                    None,
                    attr.span.clone(),
                    format!("unexpected or repeated attribute `{other}`"),
                ),
            }
        }
        let node_id = id.as_ref().map(|(v, _)| NodeId(*v));
        if id.is_none() && !attrs.iter().any(|a| a.name == "id") {
            self.emit(DiagnosticCode::BadAttribute, None, tag.range(), "node has no `id` attribute".into());
        }

        let mut parents = Vec::new();
        match parents_attr {
            None => self.emit(
                DiagnosticCode::BadAttribute,
                node_id,
                tag.range(),
                "node has no `parents` attribute".into(),
            ),
            Some(attr) if attr.value.is_empty() => {}
            Some(attr) => {
                for item in attr.value.split(',') {
                    match parse_positive(item.trim()) {
                        Some(p) => parents.push(p),
                        None => self.emit(
                            DiagnosticCode::BadAttribute,
                            node_id,
                            attr.span.clone(),
                            format!("parent `{}` is not a positive integer", item.trim()),
                        ),
                    }
                }
            }
        }

        // Content runs to `</node>`; any other structural tag first means the
        // node was never closed.
        let content_start = tag.span.1;
        let mut from = content_start;
        let (content_end, resume, closed) = loop {
            match next_tag(src, from) {
                Some((p, t)) if t.name == "node" && t.closing => break (p, t.span.1, true),
                Some((p, t)) if t.is_structural() => break (p, p, false),
                Some((p, _)) => from = p + 1,
                None => break (src.len(), src.len(), false),
            }
        };
        if !closed {
            self.emit(DiagnosticCode::UnclosedTag, node_id, tag.range(), "node is not closed by `</node>`".into());
        }
        let content = src[content_start..content_end].trim().to_string();
        if content.is_empty() {
            self.emit(DiagnosticCode::EmptyContent, node_id, tag.span.0..resume, "node has empty content".into());
        }

        let node = RawNode {
            id: id.map(|(v, _)| v),
            parents,
            content,
            tag_span: tag.range(),
            span: tag.span.0..resume,
        };
        (node, resume)
    }

    fn resolve(&mut self, raw: Vec<RawBlock>) -> (Trace, BTreeMap<NodeId, Range<usize>>, Vec<Range<usize>>) {
        let all_ids: HashSet<u32> = raw.iter().flat_map(|b| b.nodes.iter().filter_map(|n| n.id)).collect();
        let mut declared: HashSet<u32> = HashSet::new();
        let mut blocks = Vec::new();
        let mut block_spans = Vec::new();
        let mut node_spans = BTreeMap::new();

        for rb in raw {
            if rb.nodes.is_empty() {
                self.emit(DiagnosticCode::EmptyBlock, None, rb.span.clone(), format!("<{}> block wraps no nodes", rb.label));
                continue;
            }
            let mut nodes = Vec::with_capacity(rb.nodes.len());
            for rn in rb.nodes {
                let Some(id) = rn.id else { continue };
                let nid = NodeId(id);
                if declared.contains(&id) {
                    self.emit(DiagnosticCode::DuplicateId, Some(nid), rn.tag_span.clone(), format!("node id {id} is already declared"));
                    continue;
                }
                let mut parents = Vec::with_capacity(rn.parents.len());
                for p in rn.parents {
                    let (code, message) = if p == id {
                        (DiagnosticCode::SelfParent, format!("node {id} lists itself as a parent"))
                    } else if declared.contains(&p) {
                        if parents.contains(&NodeId(p)) {
                            (DiagnosticCode::DuplicateParent, format!("node {id} lists parent {p} twice"))
                        } else {
                            parents.push(NodeId(p));
                            continue;
                        }
                    } else if all_ids.contains(&p) {
                        (DiagnosticCode::ForwardParent, format!("node {id} cites parent {p} which is declared later"))
                    } else {
                        (DiagnosticCode::DanglingParent, format!("node {id} cites parent {p} which does not exist"))
                    };
                    self.emit(code, Some(nid), rn.tag_span.clone(), message);
                }
                declared.insert(id);
                node_spans.insert(nid, rn.span);
                nodes.push(ReasoningNode { id: nid, parents, content: rn.content });
            }
            if nodes.is_empty() {
                self.emit(
                    DiagnosticCode::EmptyBlock,
                    None,
                    rb.span.clone(),
                    format!("every node of this <{}> block was dropped", rb.label),
                );
                continue;
            }
            blocks.push(TagBlock { label: rb.label, nodes });
            block_spans.push(rb.span);
        }

        let answer_blocks: Vec<usize> = blocks
            .iter()
            .enumerate()
            .filter(|(_, b)| b.label == CognitiveLabel::Answer)
            .map(|(i, _)| i)
            .collect();
        for &i in &answer_blocks {
            if blocks[i].nodes.len() > 1 {
                let n = blocks[i].nodes.len();
                self.emit(
                    DiagnosticCode::AnswerMultiNode,
                    blocks[i].nodes.last().map(|n| n.id),
                    block_spans[i].clone(),
                    format!("answer block wraps {n} nodes; the last one is the answer"),
                );
            }
        }
        if let Some((_, earlier)) = answer_blocks.split_last() {
            for &i in earlier {
                self.emit(
                    DiagnosticCode::MultipleAnswers,
                    blocks[i].nodes.last().map(|n| n.id),
                    block_spans[i].clone(),
                    "more than one answer block; only the last one designates the answer".into(),
                );
            }
        }
        let answer_node_id = answer_blocks.last().and_then(|&i| blocks[i].nodes.last()).map(|n| n.id);

        if blocks.is_empty() {
            self.emit(DiagnosticCode::EmptyTrace, None, 0..self.src.len(), "no tag blocks with nodes found".into());
        }

        (Trace { blocks, answer_node_id }, node_spans, block_spans)
    }
}

fn parse_positive(s: &str) -> Option<u32> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse::<u32>().ok().filter(|&v| v > 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str =
        r#"<known><node id="1" parents="">x=2</node></known><answer><node id="2" parents="1">x=2</node></answer>"#;

    fn codes(p: &Parsed) -> Vec<&'static str> {
        p.diagnostics.iter().map(|d| d.code.as_str()).collect()
    }

    #[test]
    fn minimal_trace() {
        let p = parse_trace(MINIMAL, ParseMode::Strict);
        assert!(p.diagnostics.is_empty(), "{:?}", p.diagnostics);
        let t = p.trace.unwrap();
        assert_eq!(t.node_count(), 2);
        assert_eq!(t.answer_node_id, Some(NodeId(2)));
        assert_eq!(t.blocks[1].nodes[0].parents, vec![NodeId(1)]);
    }

    #[test]
    fn dangling_parent_strict_and_lenient() {
        let text = MINIMAL.replace(r#"parents="1""#, r#"parents="3""#);
        let strict = parse_trace(&text, ParseMode::Strict);
        assert!(strict.trace.is_none());
        assert_eq!(codes(&strict), ["dangling-parent"]);
        assert_eq!(strict.diagnostics[0].severity, Severity::Error);
        assert_eq!(strict.diagnostics[0].node_id, Some(NodeId(2)));

        let lenient = parse_trace(&text, ParseMode::Lenient);
        assert_eq!(codes(&lenient), ["dangling-parent"]);
        assert_eq!(lenient.diagnostics[0].severity, Severity::Warning);
        let t = lenient.trace.unwrap();
        assert!(t.blocks[1].nodes[0].parents.is_empty());
    }

    #[test]
    fn forward_self_and_duplicate_parents() {
        let text = r#"<generate><node id="1" parents="2">a</node><node id="2" parents="2,1,1">b</node></generate>"#;
        let p = parse_trace(text, ParseMode::Lenient);
        assert_eq!(codes(&p), ["forward-parent", "self-parent", "duplicate-parent"]);
        let t = p.trace.unwrap();
        assert_eq!(t.blocks[0].nodes[1].parents, vec![NodeId(1)]);
    }

    #[test]
    fn duplicate_id_keeps_first() {
        let text = r#"<known><node id="1" parents="">a</node></known><known><node id="1" parents="">b</node></known>"#;
        let p = parse_trace(text, ParseMode::Lenient);
        assert_eq!(codes(&p), ["duplicate-id", "empty-block"]);
        let t = p.trace.unwrap();
        assert_eq!(t.node_count(), 1);
        assert_eq!(t.blocks[0].nodes[0].content, "a");
    }

    #[test]
    fn unknown_tag_and_preamble() {
        let text = format!("Let me think.\n<think>{MINIMAL}</think>");
        let strict = parse_trace(&text, ParseMode::Strict);
        assert_eq!(codes(&strict), ["stray-text", "unknown-tag", "unknown-tag"]);
        assert!(strict.trace.is_none());
        let lenient = parse_trace(&text, ParseMode::Lenient);
        assert_eq!(lenient.trace.unwrap().node_count(), 2);
        assert_eq!(lenient.diagnostics[0].byte_span, 0..13);
    }

    #[test]
    fn unclosed_node_and_block() {
        let text = r#"<known><node id="1" parents="">a<node id="2" parents="1">b</node>"#;
        let p = parse_trace(text, ParseMode::Lenient);
        assert_eq!(codes(&p), ["unclosed-tag", "unclosed-tag"]);
        let t = p.trace.unwrap();
        assert_eq!(t.blocks[0].nodes.len(), 2);
        assert_eq!(t.blocks[0].nodes[0].content, "a");
    }

    #[test]
    fn mismatched_close_still_closes() {
        let text = r#"<known><node id="1" parents="">a</node></refine>"#;
        let p = parse_trace(text, ParseMode::Lenient);
        assert_eq!(codes(&p), ["mismatched-close"]);
        assert_eq!(p.trace.unwrap().blocks.len(), 1);
    }

    #[test]
    fn multiple_answers_last_wins() {
        let text = r#"<known><node id="1" parents="">a</node></known><answer><node id="2" parents="1">b</node></answer><answer><node id="3" parents="1">c</node></answer>"#;
        let strict = parse_trace(text, ParseMode::Strict);
        assert_eq!(codes(&strict), ["multiple-answers"]);
        let t = parse_trace(text, ParseMode::Lenient).trace.unwrap();
        assert_eq!(t.answer_node_id, Some(NodeId(3)));
        assert_eq!(t.answer_block_count(), 2);
    }

    #[test]
    fn answer_with_two_nodes() {
        let text = r#"<answer><node id="1" parents="">a</node><node id="2" parents="">b</node></answer>"#;
        let p = parse_trace(text, ParseMode::Lenient);
        assert_eq!(codes(&p), ["answer-multi-node"]);
        assert_eq!(p.trace.unwrap().answer_node_id, Some(NodeId(2)));
    }

    #[test]
    fn empty_content_and_bad_attrs() {
        let text = r#"<known><node id="x" parents="">a</node><node id="2">  </node><node parents="">c</node></known>"#;
        let p = parse_trace(text, ParseMode::Lenient);
        assert_eq!(
            codes(&p),
            ["bad-attribute", "bad-attribute", "empty-content", "bad-attribute"]
        );
        let t = p.trace.unwrap();
        assert_eq!(t.node_count(), 1);
        assert_eq!(t.blocks[0].nodes[0].id, NodeId(2));
    }

    #[test]
    fn prose_only_yields_empty_trace() {
        let p = parse_trace("The answer is 42.", ParseMode::Lenient);
        assert_eq!(codes(&p), ["stray-text", "empty-trace"]);
        assert_eq!(p.trace.unwrap(), Trace::default());
    }

    #[test]
    fn empty_input() {
        let p = parse_trace("", ParseMode::Strict);
        assert_eq!(codes(&p), ["empty-trace"]);
        assert_eq!(p.diagnostics[0].byte_span, 0..0);
    }

    #[test]
    fn comparison_inside_content_is_text() {
        let text = r#"<known><node id="1" parents="">x < 3 and <b>y</b></node></known>"#;
        let p = parse_trace(text, ParseMode::Strict);
        assert!(p.diagnostics.is_empty(), "{:?}", p.diagnostics);
        assert_eq!(p.trace.unwrap().blocks[0].nodes[0].content, "x < 3 and <b>y</b>");
    }

    #[test]
    fn node_outside_block_dropped() {
        let p = parse_trace(r#"<node id="1" parents="">a</node>"#, ParseMode::Lenient);
        assert_eq!(codes(&p), ["node-outside-block", "empty-trace"]);
    }

    #[test]
    fn spans_are_recorded() {
        let p = parse_trace(MINIMAL, ParseMode::Lenient);
        let span = p.node_spans[&NodeId(1)].clone();
        assert_eq!(&MINIMAL[span], r#"<node id="1" parents="">x=2</node>"#);
        assert_eq!(&MINIMAL[p.block_spans[1].clone()], &MINIMAL[MINIMAL.find("<answer>").unwrap()..]);
    }
}
