use std::fmt;
use std::ops::Range;

use serde::{Serialize, Serializer};

use super::NodeId;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// Stable short identifiers for every diagnostic the parser and linter emit.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum DiagnosticCode {
    UnknownTag,
    DuplicateId,
    DanglingParent,
    ForwardParent,
    SelfParent,
    DuplicateParent,
    UnclosedTag,
    MismatchedClose,
    StrayClose,
    EmptyContent,
    EmptyBlock,
    MultipleAnswers,
    AnswerMultiNode,
    StrayText,
    NodeOutsideBlock,
    BadAttribute,
    EmptyTrace,
    // style checks, lint only
    DeadEndNode,
    AnswerNotLast,
    MissingAnswer,
}

impl DiagnosticCode {
    pub fn as_str(self) -> &'static str {
        use DiagnosticCode::*;
        match self {
            UnknownTag => "unknown-tag",
            DuplicateId => "duplicate-id",
            DanglingParent => "dangling-parent",
            ForwardParent => "forward-parent",
            SelfParent => "self-parent",
            DuplicateParent => "duplicate-parent",
            UnclosedTag => "unclosed-tag",
            MismatchedClose => "mismatched-close",
            StrayClose => "stray-close",
            EmptyContent => "empty-content",
            EmptyBlock => "empty-block",
            MultipleAnswers => "multiple-answers",
            AnswerMultiNode => "answer-multi-node",
            StrayText => "stray-text",
            NodeOutsideBlock => "node-outside-block",
            BadAttribute => "bad-attribute",
            EmptyTrace => "empty-trace",
            DeadEndNode => "dead-end-node",
            AnswerNotLast => "answer-not-last",
            MissingAnswer => "missing-answer",
        }
    }
}

impl fmt::Display for DiagnosticCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for DiagnosticCode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: DiagnosticCode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node_id: Option<NodeId>,
    pub message: String,
    pub byte_span: Range<usize>,
}

impl Diagnostic {
    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    /// 1-based line and column of the span start.
    pub fn line_col(&self, source: &str) -> (usize, usize) {
        let start = self.byte_span.start.min(source.len());
        let before = &source.as_bytes()[..start];
        let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
        let line_start = before.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
        let col = source[line_start..start].chars().count() + 1;
        (line, col)
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}[{}]: {}", self.code, self.message)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_col_counts_chars() {
        let d = Diagnostic {
            severity: Severity::Warning,
            code: DiagnosticCode::StrayText,
            node_id: None,
            message: String::new(),
            byte_span: 8..9,
        };
        assert_eq!(d.line_col("ab\ncé x y"), (2, 5));
    }

    #[test]
    fn serializes_span_and_code() {
        let d = Diagnostic {
            severity: Severity::Error,
            code: DiagnosticCode::DanglingParent,
            node_id: Some(NodeId(2)),
            message: "m".into(),
            byte_span: 3..7,
        };
        assert_eq!(
            serde_json::to_string(&d).unwrap(),
            r#"{"severity":"error","code":"dangling-parent","node_id":2,"message":"m","byte_span":{"start":3,"end":7}}"#
        );
    }
}
