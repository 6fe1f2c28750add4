use std::collections::{BTreeMap, BTreeSet};

use ccdetect_core::detector::TestVotes;
use ccdetect_core::{score, simulate, DetectionParams, DetectionReport, SimParams, Verdict};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = SimParams> {
    (
        20u32..80,
        1usize..60,
        1usize..10,
        0.0f64..0.9,
        1usize..4,
        0.05f64..=1.0,
        any::<u64>(),
    )
        .prop_map(
            |(statement_count, n_passing, n_failing, cc_rate, fault_count, signature_strength, seed)| SimParams {
                statement_count,
                n_passing,
                n_failing,
                cc_rate,
                fault_count,
                signature_strength,
                seed,
                ..SimParams::default()
            },
        )
}

/// A report labeling every test of `ct` and `truth`, with CT exactly `ct`.
fn report_with_ct(ct: &[&str], truth: &BTreeSet<String>) -> DetectionReport {
    let ct: BTreeSet<String> = ct.iter().map(|s| s.to_string()).collect();
    let per_test: BTreeMap<String, TestVotes> = ct
        .iter()
        .map(|id| (id.clone(), TestVotes::tally(vec![Verdict::Failing])))
        .chain(
            truth
                .difference(&ct)
                .map(|id| (id.clone(), TestVotes::tally(vec![Verdict::Passing]))),
        )
        .collect();
    DetectionReport {
        params: DetectionParams::default(),
        run_digest: 0,
        chunks: Vec::new(),
        per_test,
        ct,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn truth_is_exactly_the_passing_tests_on_a_fault(p in params()) {
        let sim = simulate(&p).unwrap();
        let faults = sim.run.faulty_statements();
        let on_fault: BTreeSet<String> = sim
            .run
            .passing()
            .filter(|t| t.trace.sequence.iter().any(|s| faults.contains(s)))
            .map(|t| t.id().to_string())
            .collect();
        prop_assert_eq!(&sim.ground_truth_cc, &on_fault);
        prop_assert_eq!(sim.ground_truth_cc.len(), p.cc_count());
        for t in sim.run.failing() {
            prop_assert!(t.trace.sequence.iter().any(|s| faults.contains(s)));
        }
        prop_assert_eq!(sim.run.failing().count(), p.n_failing);
        prop_assert_eq!(sim.run.passing().count(), p.n_passing);
    }

    #[test]
    fn perfect_report_scores_one(p in params()) {
        let sim = simulate(&p).unwrap();
        let ids: Vec<&str> = sim.ground_truth_cc.iter().map(String::as_str).collect();
        let s = score(&report_with_ct(&ids, &sim.ground_truth_cc), &sim.ground_truth_cc).unwrap();
        prop_assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn score_matches_set_tally(
        truth in prop::collection::btree_set(0usize..30, 0..30),
        ct in prop::collection::btree_set(0usize..30, 0..30),
    ) {
        let name = |i: &usize| format!("T{i}");
        let truth: BTreeSet<String> = truth.iter().map(name).collect();
        let ct_names: Vec<String> = ct.iter().map(name).collect();
        let ct_refs: Vec<&str> = ct_names.iter().map(String::as_str).collect();
        let s = score(&report_with_ct(&ct_refs, &truth), &truth).unwrap();

        let tp = ct_names.iter().filter(|c| truth.contains(*c)).count();
        let fp = ct_names.len() - tp;
        let fn_ = truth.len() - tp;
        prop_assert_eq!((s.true_positives, s.false_positives, s.false_negatives), (tp, fp, fn_));
        let precision = if ct_names.is_empty() { 1.0 } else { tp as f64 / ct_names.len() as f64 };
        let recall = if truth.is_empty() { 1.0 } else { tp as f64 / truth.len() as f64 };
        prop_assert!((s.precision - precision).abs() < 1e-12);
        prop_assert!((s.recall - recall).abs() < 1e-12);
    }
}

#[test]
fn same_seed_same_run() {
    let p = SimParams {
        seed: 77,
        ..SimParams::default()
    };
    assert_eq!(simulate(&p).unwrap(), simulate(&p).unwrap());
}

#[test]
fn empty_ct_with_cc_present_has_zero_recall() {
    let truth: BTreeSet<String> = ["T1".to_string()].into_iter().collect();
    let s = score(&report_with_ct(&[], &truth), &truth).unwrap();
    assert_eq!(s.recall, 0.0);
    assert_eq!(s.precision, 1.0);
}

#[test]
fn unlabeled_truth_is_a_mismatch() {
    let truth: BTreeSet<String> = ["T1".to_string()].into_iter().collect();
    assert!(score(&report_with_ct(&[], &BTreeSet::new()), &truth).is_err());
}
