mod support;

use grp_core::advantage::{grpo_advantages, scae_advantages, GroupSample, Stratum};
use grp_core::batch::run_score;
use grp_core::config::RunConfig;
use grp_core::objective::{grpo_objective, kl_estimate, ObjectiveConfig, SequenceAdvantage, SequenceLogProbs};
use grp_core::rewards::{reward_components, reward_total, RewardWeights};
use grp_core::{
    build_graph, check_record, parse_trace, refinement_feedback, score_trace, serialize_trace, structural_check, Exact,
    ParseMode, WhitespaceCounter,
};
use proptest::prelude::*;
use rand::Rng;
use support::{fuzz_text, random_trace, rng};

proptest! {
    #[test]
    fn serialize_then_parse_is_identity(seed in any::<u64>()) {
        let trace = random_trace(&mut rng(seed), 20);
        let text = serialize_trace(&trace).unwrap();
        let parsed = parse_trace(&text, ParseMode::Strict);
        prop_assert!(parsed.diagnostics.is_empty(), "{:?}\n{}", parsed.diagnostics, text);
        prop_assert_eq!(parsed.trace.as_ref(), Some(&trace));
        prop_assert_eq!(serialize_trace(parsed.trace.as_ref().unwrap()).unwrap(), text);
    }

    #[test]
    fn modes_detect_the_same_defects(seed in any::<u64>()) {
        let text = fuzz_text(&mut rng(seed));
        let strict = parse_trace(&text, ParseMode::Strict);
        let lenient = parse_trace(&text, ParseMode::Lenient);
        let key = |p: &grp_core::trace::Parsed| p.diagnostics.iter().map(|d| (d.code, d.byte_span.clone())).collect::<Vec<_>>();
        prop_assert_eq!(key(&strict), key(&lenient));
        prop_assert!(strict.diagnostics.iter().all(|d| d.is_error()));
        prop_assert!(lenient.diagnostics.iter().all(|d| !d.is_error()));
        prop_assert_eq!(strict.trace.is_none(), !strict.diagnostics.is_empty());
        prop_assert!(lenient.trace.is_some());
        for d in &lenient.diagnostics {
            prop_assert!(d.byte_span.start <= d.byte_span.end && d.byte_span.end <= text.len());
            prop_assert!(text.is_char_boundary(d.byte_span.start) && text.is_char_boundary(d.byte_span.end));
        }
    }

    #[test]
    fn arbitrary_text_never_panics(text in "\\PC{0,200}", tags in proptest::collection::vec("<(/?)(node|known|answer|refine|x)( id=\"[0-9]\")?>", 0..8)) {
        let mixed = tags.iter().fold(text, |acc, t| format!("{acc}{t}"));
        for mode in [ParseMode::Strict, ParseMode::Lenient] {
            let scored = grp_core::score_text(&mixed, mode, &WhitespaceCounter, &RewardWeights::default());
            prop_assert!(scored.rewards.fields().iter().all(|(_, v): &(_, f64)| (0.0..=1.0).contains(v)));
        }
        let _ = grp_core::trace::lint_trace(&mixed);
    }

    #[test]
    fn rewards_stay_in_unit_interval(seed in any::<u64>()) {
        let text = fuzz_text(&mut rng(seed));
        for mode in [ParseMode::Strict, ParseMode::Lenient] {
            let scored = grp_core::score_text::<f64>(&text, mode, &WhitespaceCounter, &RewardWeights::default());
            for (name, v) in scored.rewards.fields() {
                prop_assert!((0.0..=1.0).contains(&v), "{name} = {v}");
            }
            prop_assert!(scored.rewards.reach == 0.0 || scored.rewards.reach == 1.0);
        }
    }

    #[test]
    fn exact_and_float_rewards_agree(seed in any::<u64>()) {
        let mut r = rng(seed);
        let trace = random_trace(&mut r, 15);
        let exact: grp_core::rewards::RewardVector<Exact> = score_trace(&trace, &WhitespaceCounter, &RewardWeights::default());
        let float: grp_core::RewardVector = score_trace(&trace, &WhitespaceCounter, &RewardWeights::default());
        for ((name, q), (_, f)) in exact.fields().into_iter().zip(float.fields()) {
            let qf = *q.numer() as f64 / *q.denom() as f64;
            prop_assert!((qf - f).abs() <= 1e-12, "{name}: {q} vs {f}");
        }
    }

    #[test]
    fn total_is_the_weighted_sum(seed in any::<u64>()) {
        let mut r = rng(seed);
        let trace = random_trace(&mut r, 15);
        let raw: Vec<u32> = (0..5).map(|_| r.random_range(0..10)).collect();
        let sum = raw.iter().sum::<u32>().max(1) as i64;
        let w: Vec<Exact> = raw.iter().map(|&x| Exact::new(x as i64, sum)).collect();
        let weights = if raw.iter().all(|&x| x == 0) {
            RewardWeights::default()
        } else {
            RewardWeights::new(w[0], w[1], w[2], w[3], w[4]).unwrap()
        };
        let graph = build_graph(&trace);
        let c = reward_components::<Exact>(&trace, &graph, &WhitespaceCounter);
        let v = reward_total(&c, &weights).unwrap();
        let expected = weights.fmt * c.fmt.total + weights.conn * c.conn + weights.ers * c.ers + weights.reach * c.reach + weights.rev * c.rev;
        prop_assert_eq!(v.total, expected);
        let three = Exact::from_integer(3);
        prop_assert_eq!(c.fmt.total, (c.fmt.dens + c.fmt.topo + c.fmt.para) / three);
    }

    #[test]
    fn scae_guarantees(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..=16);
        let group: Vec<GroupSample<f64>> = (0..n)
            .map(|_| GroupSample::new(if r.random_bool(0.5) { 1.0 } else { 0.0 }, r.random_range(0.0..=1.0)))
            .collect();
        let out = scae_advantages(&group).unwrap();
        let mean = out.stats.mean_acc;
        let (mut lo_correct, mut hi_wrong) = (f64::INFINITY, f64::NEG_INFINITY);
        for res in &out.results {
            match res.stratum {
                Stratum::Correct => {
                    prop_assert!(res.advantage >= 1.0 - mean);
                    lo_correct = lo_correct.min(res.advantage);
                }
                Stratum::Wrong => {
                    prop_assert!(res.advantage <= -mean);
                    hi_wrong = hi_wrong.max(res.advantage);
                }
            }
        }
        if out.stats.correct > 0 && out.stats.wrong > 0 {
            prop_assert!(lo_correct > hi_wrong);
        }
    }

    #[test]
    fn scae_exact_matches_float(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..=10);
        let raw: Vec<(i64, i64)> = (0..n).map(|_| (r.random_range(0..=1), r.random_range(0..=100))).collect();
        let exact: Vec<GroupSample<Exact>> = raw.iter().map(|&(a, x)| GroupSample::new(Exact::from_integer(a), Exact::new(x, 100))).collect();
        let float: Vec<GroupSample<f64>> = raw.iter().map(|&(a, x)| GroupSample::new(a as f64, x as f64 / 100.0)).collect();
        let e = scae_advantages(&exact).unwrap().advantages();
        let f = scae_advantages(&float).unwrap().advantages();
        for (q, x) in e.iter().zip(f) {
            prop_assert!((*q.numer() as f64 / *q.denom() as f64 - x).abs() < 1e-12);
        }
    }

    #[test]
    fn grpo_standardizes(rewards in proptest::collection::vec(-5.0f64..5.0, 1..20)) {
        let a = grpo_advantages(&rewards).unwrap();
        let n = a.len() as f64;
        let mean = a.iter().sum::<f64>() / n;
        prop_assert!(mean.abs() < 1e-9);
        if a.iter().any(|&x| x != 0.0) {
            let var = a.iter().map(|x| x * x).sum::<f64>() / n;
            prop_assert!((var - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn kl_is_non_negative(new in proptest::collection::vec(-30.0f64..=0.0, 1..50), shift in -10.0f64..10.0) {
        let reference: Vec<f64> = new.iter().map(|x| (x + shift).min(0.0)).collect();
        for k in kl_estimate(&new, &reference).unwrap() {
            prop_assert!(k >= 0.0);
        }
        prop_assert!(kl_estimate(&new, &new).unwrap().iter().all(|&k| k == 0.0));
    }

    #[test]
    fn identical_policies_give_mean_advantage(seed in any::<u64>()) {
        let mut r = rng(seed);
        let group: Vec<SequenceLogProbs<f64>> = (0..r.random_range(1..6))
            .map(|_| {
                let lp: Vec<f64> = (0..r.random_range(1..12)).map(|_| r.random_range(-8.0..=0.0)).collect();
                SequenceLogProbs { logp_new: lp.clone(), logp_old: lp.clone(), logp_ref: lp, advantage: SequenceAdvantage::Sequence(r.random_range(-3.0..3.0)) }
            })
            .collect();
        let report = grpo_objective(&group, &ObjectiveConfig::new(0.2, 0.04).unwrap()).unwrap();
        let mean = group.iter().map(|s| match s.advantage { SequenceAdvantage::Sequence(a) => a, _ => unreachable!() }).sum::<f64>() / group.len() as f64;
        prop_assert!((report.objective - mean).abs() <= 1e-12);
    }

    #[test]
    fn qc_agrees_with_rewards(seed in any::<u64>()) {
        let text = fuzz_text(&mut rng(seed));
        let trace = parse_trace(&text, ParseMode::Lenient).trace_or_empty();
        let report = structural_check("p", &trace);
        let graph = build_graph(&trace);
        let c = reward_components::<Exact>(&trace, &graph, &WhitespaceCounter);
        let predicate = c.fmt.is_perfect() && c.reach == Exact::from_integer(1) && trace.answer_block_count() == 1;
        prop_assert_eq!(report.passed, predicate, "{:?}\n{}", report, text);
        prop_assert_eq!(report.passed, report.violations.is_empty());
        for v in &report.violations {
            prop_assert!(v.node_ids.iter().all(|&id| trace.contains(id)));
        }
        let record = check_record("p", &text);
        prop_assert!(!record.passed || report.passed);
        if !record.passed {
            let fb = refinement_feedback(&record).unwrap();
            prop_assert_eq!(fb.lines().count(), record.violations.len() + 1);
            prop_assert_eq!(&fb, &refinement_feedback(&record.clone()).unwrap());
        }
    }

    #[test]
    fn batch_output_independent_of_jobs(seed in any::<u64>()) {
        let mut r = rng(seed);
        let input: String = (0..r.random_range(1..40))
            .map(|i| format!("{}\n", serde_json::json!({"id": i, "trace_text": fuzz_text(&mut r)})))
            .collect();
        let one = run_score(&input, &RunConfig { jobs: 1, ..Default::default() }).unwrap();
        let many = run_score(&input, &RunConfig { jobs: 4, ..Default::default() }).unwrap();
        prop_assert_eq!(one.lines.len(), input.lines().count());
        prop_assert_eq!(one, many);
    }
}
