//! JSONL batch drivers behind the command-line tool.
//!
//! Each driver maps input lines to output lines one to one, in input order,
//! whatever the degree of parallelism. Blank input lines are skipped. A
//! malformed record aborts the batch with its 1-based line number.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::advantage::{combined_rewards, grpo_advantages, scae_advantages, GroupSample, Stratum};
use crate::config::{EffectiveConfig, RunConfig};
use crate::objective::{grpo_objective, ObjectiveConfig, SequenceLogProbs};
use crate::qc::{apply_judge, check_record, QcReport, QcSummary, SemanticJudge};
use crate::rewards::{score_text, RewardVector};
use crate::trace::{lint_trace, parse_trace, serialize_trace, DiagnosticCode, NodeId, Severity};

/// Version of the JSONL record layouts.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BatchError {
    #[error("line {line}: {message}")]
    Record { line: usize, message: String },
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

/// Output lines of one batch and whether any record was degraded.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutput {
    pub lines: Vec<String>,
    /// Some record had parse diagnostics, or failed QC.
    pub degraded: bool,
}

#[derive(Serialize)]
struct Header<'a> {
    kind: &'static str,
    version: u32,
    command: &'a str,
    config: EffectiveConfig,
}

/// First output line: the command and the configuration that shaped results.
pub fn header_line(command: &str, config: &RunConfig) -> String {
    to_line(&Header { kind: "header", version: FORMAT_VERSION, command, config: config.effective() })
}

fn to_line<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("output records serialize")
}

fn map_lines<R, F>(input: &str, jobs: usize, f: F) -> Result<Vec<R>, BatchError>
where
    R: Send,
    F: Fn(&str) -> Result<R, String> + Sync,
{
    let records: Vec<(usize, &str)> = input
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l))
        .collect();
    let results: Vec<Result<R, String>> = if jobs <= 1 {
        records.iter().map(|(_, l)| f(l)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| BatchError::Pool(e.to_string()))?;
        pool.install(|| records.par_iter().map(|(_, l)| f(l)).collect())
    };
    results
        .into_iter()
        .zip(&records)
        .map(|(r, &(line, _))| r.map_err(|message| BatchError::Record { line, message }))
        .collect()
}

fn parse_record<'a, T: Deserialize<'a>>(line: &'a str) -> Result<T, String> {
    serde_json::from_str(line).map_err(|e| e.to_string())
}

#[derive(Deserialize)]
struct TraceRecord {
    id: Value,
    trace_text: String,
}

#[derive(Serialize)]
struct DiagnosticOut<'a> {
    severity: Severity,
    code: DiagnosticCode,
    #[serde(skip_serializing_if = "Option::is_none")]
    node_id: Option<NodeId>,
    message: &'a str,
    line: usize,
    column: usize,
    byte_span: [usize; 2],
}

#[derive(Serialize)]
struct ValidateOut<'a> {
    id: &'a Value,
    ok: bool,
    diagnostics: Vec<DiagnosticOut<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    canonical: Option<String>,
}

/// Parses each trace and reports diagnostics and, when the parsed trace is
/// well formed, its canonical text. `lint` adds style checks.
pub fn run_validate(input: &str, config: &RunConfig, lint: bool) -> Result<BatchOutput, BatchError> {
    let rows = map_lines(input, config.jobs, |line| {
        let rec: TraceRecord = parse_record(line)?;
        let parsed = parse_trace(&rec.trace_text, config.mode);
        let mut diags = parsed.diagnostics.clone();
        if lint {
            let style = [DiagnosticCode::DeadEndNode, DiagnosticCode::AnswerNotLast, DiagnosticCode::MissingAnswer];
            diags.extend(lint_trace(&rec.trace_text).into_iter().filter(|d| style.contains(&d.code)));
        }
        let canonical = parsed.trace.as_ref().and_then(|t| serialize_trace(t).ok());
        let degraded = !diags.is_empty();
        let out = ValidateOut {
            id: &rec.id,
            ok: diags.is_empty(),
            diagnostics: diags
                .iter()
                .map(|d| {
                    let (line, column) = d.line_col(&rec.trace_text);
                    DiagnosticOut {
                        severity: d.severity,
                        code: d.code,
                        node_id: d.node_id,
                        message: &d.message,
                        line,
                        column,
                        byte_span: [d.byte_span.start, d.byte_span.end],
                    }
                })
                .collect(),
            canonical,
        };
        Ok((to_line(&out), degraded))
    })?;
    Ok(collect(rows))
}

fn collect(rows: Vec<(String, bool)>) -> BatchOutput {
    let degraded = rows.iter().any(|(_, d)| *d);
    BatchOutput { lines: rows.into_iter().map(|(l, _)| l).collect(), degraded }
}

#[derive(Serialize)]
struct ScoreOut<'a> {
    id: &'a Value,
    #[serde(flatten)]
    rewards: RewardVector<f64>,
    diagnostics: usize,
}

/// Scores each rollout `{id, trace_text}`.
pub fn run_score(input: &str, config: &RunConfig) -> Result<BatchOutput, BatchError> {
    let rows = map_lines(input, config.jobs, |line| {
        let rec: TraceRecord = parse_record(line)?;
        let scored = score_text(&rec.trace_text, config.mode, &config.counter, &config.weights);
        let n = scored.diagnostics.len();
        Ok((to_line(&ScoreOut { id: &rec.id, rewards: scored.rewards, diagnostics: n }), n > 0))
    })?;
    Ok(collect(rows))
}

#[derive(Deserialize)]
struct SampleIn {
    acc: f64,
    #[serde(default)]
    aux: Option<f64>,
    #[serde(default)]
    trace_text: Option<String>,
}

#[derive(Deserialize)]
struct GroupIn {
    group_id: Value,
    samples: Vec<SampleIn>,
}

#[derive(Serialize)]
struct SampleOut {
    acc: f64,
    aux: f64,
    stratum: Stratum,
    scae: f64,
    grpo: f64,
}

#[derive(Serialize)]
struct GroupOut<'a> {
    group_id: &'a Value,
    mean_acc: f64,
    mean_aux_correct: Option<f64>,
    mean_aux_wrong: Option<f64>,
    samples: Vec<SampleOut>,
}

/// Stratified and vanilla advantages for each group
/// `{group_id, samples: [{acc, aux | trace_text}]}`. A sample without `aux`
/// is scored from its trace. The vanilla column standardizes `acc + aux`.
pub fn run_advantage(input: &str, config: &RunConfig) -> Result<BatchOutput, BatchError> {
    let rows = map_lines(input, config.jobs, |line| {
        let rec: GroupIn = parse_record(line)?;
        let mut degraded = false;
        let mut group = Vec::with_capacity(rec.samples.len());
        for (i, s) in rec.samples.iter().enumerate() {
            let aux = match (s.aux, &s.trace_text) {
                (Some(a), _) => a,
                (None, Some(text)) => {
                    let scored = score_text(text, config.mode, &config.counter, &config.weights);
                    degraded |= !scored.diagnostics.is_empty();
                    config.aux.aux(&scored.rewards)
                }
                (None, None) => return Err(format!("sample {i} has neither aux nor trace_text")),
            };
            group.push(GroupSample::new(s.acc, aux));
        }
        let scae = scae_advantages(&group).map_err(|e| e.to_string())?;
        let grpo = grpo_advantages(&combined_rewards(&group)).map_err(|e| e.to_string())?;
        let samples = group
            .iter()
            .zip(&scae.results)
            .zip(grpo)
            .map(|((s, r), g)| SampleOut { acc: s.acc, aux: s.aux, stratum: r.stratum, scae: r.advantage, grpo: g })
            .collect();
        let out = GroupOut {
            group_id: &rec.group_id,
            mean_acc: scae.stats.mean_acc,
            mean_aux_correct: scae.stats.mean_aux_correct,
            mean_aux_wrong: scae.stats.mean_aux_wrong,
            samples,
        };
        Ok((to_line(&out), degraded))
    })?;
    Ok(collect(rows))
}

#[derive(Deserialize)]
struct ObjectiveIn {
    group_id: Value,
    sequences: Vec<SequenceLogProbs<f64>>,
}

#[derive(Serialize)]
struct SequenceOut {
    surrogate_mean: f64,
    kl_mean: f64,
    value: f64,
}

#[derive(Serialize)]
struct ObjectiveOut<'a> {
    group_id: &'a Value,
    objective: f64,
    mean_surrogate: f64,
    mean_kl: f64,
    sequences: Vec<SequenceOut>,
}

/// Evaluates the clipped objective for each group
/// `{group_id, sequences: [{logp_new, logp_old, logp_ref, advantage}]}`.
pub fn run_objective(input: &str, config: &RunConfig, objective: &ObjectiveConfig<f64>) -> Result<BatchOutput, BatchError> {
    let rows = map_lines(input, config.jobs, |line| {
        let rec: ObjectiveIn = parse_record(line)?;
        let r = grpo_objective(&rec.sequences, objective).map_err(|e| e.to_string())?;
        let out = ObjectiveOut {
            group_id: &rec.group_id,
            objective: r.objective,
            mean_surrogate: r.mean_surrogate,
            mean_kl: r.mean_kl,
            sequences: r
                .sequences
                .iter()
                .map(|s| SequenceOut { surrogate_mean: s.surrogate_mean, kl_mean: s.kl_mean, value: s.value })
                .collect(),
        };
        Ok((to_line(&out), false))
    })?;
    Ok(collect(rows))
}

#[derive(Deserialize)]
struct QcIn {
    id: Value,
    trace_text: String,
    #[serde(default)]
    answer_correct: Option<bool>,
}

#[derive(Serialize)]
struct QcOut {
    #[serde(flatten)]
    report: QcReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    answer_correct: Option<bool>,
}

/// QC reports for `{id, trace_text, answer_correct?}` records, plus the
/// batch summary. Records failing QC count as degraded.
pub fn run_qc(
    input: &str,
    config: &RunConfig,
    judge: Option<&dyn SemanticJudge>,
) -> Result<(BatchOutput, QcSummary), BatchError> {
    let reports = map_lines(input, config.jobs, |line| {
        let rec: QcIn = parse_record(line)?;
        let id = match &rec.id {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        let mut report = check_record(id, &rec.trace_text);
        if let (Some(judge), Some(trace)) = (judge, parse_trace(&rec.trace_text, config.mode).trace) {
            apply_judge(&mut report, &trace, judge);
        }
        Ok(QcOut { report, answer_correct: rec.answer_correct })
    })?;
    let summary = QcSummary::from_reports(reports.iter().map(|r| &r.report));
    let degraded = reports.iter().any(|r| !r.report.accepted());
    Ok((BatchOutput { lines: reports.iter().map(to_line).collect(), degraded }, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    const CHAIN: &str = r#"<known><node id=\"1\" parents=\"\">x = 2</node></known><answer><node id=\"2\" parents=\"1\">x = 2</node></answer>"#;

    fn cfg(jobs: usize) -> RunConfig {
        RunConfig { jobs, ..RunConfig::default() }
    }

    fn rollouts() -> String {
        format!(
            "{{\"id\":\"a\",\"trace_text\":\"{CHAIN}\"}}\n\n{{\"id\":2,\"trace_text\":\"just prose\"}}\n{{\"id\":\"c\",\"trace_text\":\"{CHAIN}\"}}\n"
        )
    }

    #[test]
    fn score_preserves_order_and_flags_prose() {
        let out = run_score(&rollouts(), &cfg(1)).unwrap();
        assert_eq!(out.lines.len(), 3);
        assert!(out.degraded);
        assert!(out.lines[0].starts_with(r#"{"id":"a","fmt_dens":1.0"#), "{}", out.lines[0]);
        assert!(out.lines[0].ends_with(r#""total":1.0,"diagnostics":0}"#));
        assert!(out.lines[1].contains(r#""id":2,"fmt_dens":0.0"#));
        assert!(out.lines[1].contains(r#""total":0.0"#));
        assert_eq!(out, run_score(&rollouts(), &cfg(4)).unwrap());
    }

    #[test]
    fn bad_record_reports_line() {
        let err = run_score("{\"id\":1,\"trace_text\":\"x\"}\n\nnot json\n", &cfg(2)).unwrap_err();
        assert!(matches!(err, BatchError::Record { line: 3, .. }));
    }

    #[test]
    fn advantage_worked_group() {
        let input = r#"{"group_id":"g","samples":[{"acc":1,"aux":0.8},{"acc":1,"aux":0.6},{"acc":0,"aux":0.9},{"acc":0,"aux":0.3}]}"#;
        let out = run_advantage(input, &cfg(1)).unwrap();
        let v: Value = serde_json::from_str(&out.lines[0]).unwrap();
        let scae: Vec<f64> = v["samples"].as_array().unwrap().iter().map(|s| s["scae"].as_f64().unwrap()).collect();
        for (a, b) in scae.iter().zip([0.6, 0.5, -0.5, -0.8]) {
            assert!((a - b).abs() < 1e-12, "{scae:?}");
        }
        assert!(!out.degraded);
        let empty = run_advantage("{\"group_id\":1,\"samples\":[]}", &cfg(1)).unwrap_err();
        assert!(matches!(empty, BatchError::Record { line: 1, .. }));
    }

    #[test]
    fn advantage_from_traces() {
        let input = format!(r#"{{"group_id":1,"samples":[{{"acc":1,"trace_text":"{CHAIN}"}},{{"acc":0,"trace_text":"prose"}}]}}"#);
        let out = run_advantage(&input, &cfg(1)).unwrap();
        assert!(out.degraded);
        assert!(out.lines[0].contains(r#""aux":1.0"#));
    }

    #[test]
    fn validate_emits_canonical_text() {
        let out = run_validate(&rollouts(), &cfg(1), false).unwrap();
        assert!(out.lines[0].contains(r#""ok":true"#));
        assert!(out.lines[0].contains(r#""canonical":"<known>\n<node id=\"1\" parents=\"\">x = 2</node>\n</known>\n"#));
        assert!(out.lines[1].contains(r#""code":"stray-text""#));
        let no_answer = r#"{"id":1,"trace_text":"<known><node id=\"1\" parents=\"\">a</node></known>"}"#;
        assert!(run_validate(no_answer, &cfg(1), false).unwrap().lines[0].contains(r#""ok":true"#));
        let linted = run_validate(no_answer, &cfg(1), true).unwrap();
        assert!(linted.lines[0].contains("missing-answer"));
    }

    #[test]
    fn qc_summary_and_passthrough() {
        let input = format!("{{\"id\":\"a\",\"trace_text\":\"{CHAIN}\",\"answer_correct\":true}}\n{{\"id\":7,\"trace_text\":\"prose\"}}\n");
        let (out, summary) = run_qc(&input, &cfg(1), None).unwrap();
        assert_eq!(out.lines[0], r#"{"id":"a","passed":true,"violations":[],"answer_correct":true}"#);
        assert!(out.lines[1].starts_with(r#"{"id":"7","passed":false"#));
        assert_eq!((summary.records, summary.passed), (2, 1));
        assert!(out.degraded);
    }

    #[test]
    fn objective_lines() {
        let input = r#"{"group_id":0,"sequences":[{"logp_new":[-1.0],"logp_old":[-1.0],"logp_ref":[-1.0],"advantage":0.5}]}"#;
        let obj = ObjectiveConfig::new(0.2, 0.04).unwrap();
        let out = run_objective(input, &cfg(1), &obj).unwrap();
        assert_eq!(
            out.lines[0],
            r#"{"group_id":0,"objective":0.5,"mean_surrogate":0.5,"mean_kl":0.0,"sequences":[{"surrogate_mean":0.5,"kl_mean":0.0,"value":0.5}]}"#
        );
    }

    #[test]
    fn header() {
        let h = header_line("score", &cfg(8));
        assert!(h.starts_with(r#"{"kind":"header","version":1,"command":"score","config":{"weights""#));
        assert!(!h.contains("jobs"));
    }
}
