use std::collections::HashSet;

use super::{parse_trace, CognitiveLabel, Diagnostic, DiagnosticCode, ParseMode, Severity};

/// Lenient-mode parse diagnostics followed by style warnings.
///
/// Style checks: an answer block followed by reasoning blocks
/// (`answer-not-last`), a node that is neither cited by any other node nor the
/// answer (`dead-end-node`), and a trace with nodes but no answer block
/// (`missing-answer`).
pub fn lint_trace(text: &str) -> Vec<Diagnostic> {
    let parsed = parse_trace(text, ParseMode::Lenient);
    let mut out = parsed.diagnostics;
    let Some(trace) = parsed.trace else { return out };
    if trace.blocks.is_empty() {
        return out;
    }

    let warn = |code, node_id, byte_span, message| Diagnostic {
        severity: Severity::Warning,
        code,
        node_id,
        message,
        byte_span,
    };

    for (i, block) in trace.blocks.iter().enumerate() {
        if block.label == CognitiveLabel::Answer
            && trace.blocks[i + 1..].iter().any(|b| b.label != CognitiveLabel::Answer)
        {
            out.push(warn(
                DiagnosticCode::AnswerNotLast,
                block.nodes.last().map(|n| n.id),
                parsed.block_spans[i].clone(),
                "answer block is followed by further reasoning blocks".into(),
            ));
        }
    }

    let cited: HashSet<_> = trace.labeled_nodes().flat_map(|(_, n)| n.parents.iter().copied()).collect();
    for (_, node) in trace.labeled_nodes() {
        if Some(node.id) != trace.answer_node_id && !cited.contains(&node.id) {
            out.push(warn(
                DiagnosticCode::DeadEndNode,
                Some(node.id),
                parsed.node_spans[&node.id].clone(),
                format!("node {} is never cited and is not the answer", node.id),
            ));
        }
    }

    if trace.answer_node_id.is_none() {
        out.push(warn(DiagnosticCode::MissingAnswer, None, 0..text.len(), "trace has no answer block".into()));
    }
    out
}
