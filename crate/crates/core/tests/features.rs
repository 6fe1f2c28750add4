use ccdetect_core::features::PcaSettings;
use ccdetect_core::{Combo, FeatureMatrix, PcaMode, PcaModel, StatementId, TestCase, Verdict};
use proptest::prelude::*;

fn tests() -> impl Strategy<Value = Vec<TestCase>> {
    prop::collection::vec(prop::collection::vec((1u32..8).prop_map(StatementId), 1..20), 2..12).prop_map(|traces| {
        traces
            .into_iter()
            .enumerate()
            .map(|(i, t)| {
                TestCase::new(
                    format!("t{i}"),
                    if i % 2 == 0 { Verdict::Passing } else { Verdict::Failing },
                    t,
                )
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matrix_rows_are_window_counts(ts in tests(), combo in prop::sample::select(Combo::ALL.to_vec())) {
        let m = FeatureMatrix::from_tests(&ts, combo);
        prop_assert_eq!(m.rows().len(), ts.len());
        for (t, row) in ts.iter().zip(m.rows()) {
            let total: f64 = row.iter().sum();
            prop_assert_eq!(total as usize, (t.trace.sequence.len() + 1).saturating_sub(combo.k()));
            prop_assert_eq!(&m.encode(&t.trace.sequence), row);
        }
        prop_assert!(m.columns().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn unseen_keys_are_dropped(ts in tests()) {
        let m = FeatureMatrix::from_tests(&ts, Combo::One);
        let row = m.encode(&[StatementId(99), StatementId(99)]);
        prop_assert!(row.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn dimension_fraction_component_count(rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 6), 10..20), f in 0.05f64..=1.0) {
        let m = PcaModel::fit(&rows, PcaMode::DimensionFraction, f).unwrap();
        let want = ((f * 6.0 - 1e-9).ceil() as usize).clamp(1, 6);
        prop_assert_eq!(m.output_dimension(), want);
    }

    #[test]
    fn variance_fraction_is_minimal(rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 5), 8..20), f in 0.05f64..0.99) {
        let m = PcaModel::fit(&rows, PcaMode::VarianceFraction, f).unwrap();
        let ratios = m.explained_variance_ratio();
        let reached: f64 = ratios.iter().sum();
        prop_assert!(reached >= f - 1e-9);
        let before: f64 = ratios[..ratios.len() - 1].iter().sum();
        prop_assert!(before < f + 1e-9);
    }

    #[test]
    fn projection_is_applied_to_featurize(ts in tests()) {
        let m = FeatureMatrix::from_tests(&ts, Combo::One);
        let distinct = m.rows().windows(2).any(|w| w[0] != w[1]);
        prop_assume!(distinct);
        let p = m.clone().project(PcaSettings { mode: PcaMode::DimensionFraction, fraction: 1.0 }).unwrap();
        for (t, row) in ts.iter().zip(p.rows()) {
            let again = p.featurize(&t.trace.sequence);
            for (a, b) in again.iter().zip(row) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
