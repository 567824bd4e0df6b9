use std::fmt::Write;

use super::{Trace, TraceError};

/// Emits the canonical text form of a trace.
///
/// Blocks appear in declaration order, each opening and closing tag and each
/// node on its own line, `id` before `parents`, LF line endings and a final
/// newline. Output is rejected for traces that break an invariant, so
/// parsing the result in strict mode always yields `trace` back.
pub fn serialize_trace(trace: &Trace) -> Result<String, TraceError> {
    trace.validate()?;
    let mut out = String::new();
    for block in &trace.blocks {
        let label = block.label.as_str();
        let _ = writeln!(out, "<{label}>");
        for node in &block.nodes {
            let parents = node
                .parents
                .iter()
                .map(|p| p.0.to_string())
                .collect::<Vec<_>>()
                .join(",");
            let _ = writeln!(out, "<node id=\"{}\" parents=\"{parents}\">{}</node>", node.id, node.content);
        }
        let _ = writeln!(out, "</{label}>");
    }
    Ok(out)
}
