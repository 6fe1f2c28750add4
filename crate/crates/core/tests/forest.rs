use ccdetect_core::forest::ClassCounts;
use ccdetect_core::{train_forest, ForestParams, TreeNode, Verdict};
use proptest::prelude::*;

fn data() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Verdict>)> {
    (4usize..40, 1usize..5)
        .prop_flat_map(|(n, d)| {
            (
                prop::collection::vec(prop::collection::vec((0u8..6).prop_map(f64::from), d), n),
                prop::collection::vec(any::<bool>(), n),
            )
        })
        .prop_filter("two classes", |(_, y)| y.iter().any(|&b| b) && y.iter().any(|&b| !b))
        .prop_map(|(x, y)| {
            (
                x,
                y.into_iter()
                    .map(|f| if f { Verdict::Failing } else { Verdict::Passing })
                    .collect(),
            )
        })
}

fn gini_mass(c: (f64, f64)) -> f64 {
    let n = c.0 + c.1;
    if n == 0.0 {
        0.0
    } else {
        n - (c.0 * c.0 + c.1 * c.1) / n
    }
}

/// Recounts the rows reaching `node` and checks leaf counts and that every
/// split leaves the summed child impurity no larger than the parent's.
fn check(node: &TreeNode, x: &[Vec<f64>], y: &[Verdict], rows: &[usize]) -> Result<(), TestCaseError> {
    let f = rows.iter().filter(|&&i| y[i].is_failing()).count();
    let counts = (f as f64, (rows.len() - f) as f64);
    match node {
        TreeNode::Leaf { counts: c, label } => {
            prop_assert_eq!(
                *c,
                ClassCounts {
                    failing: f as u32,
                    passing: (rows.len() - f) as u32
                }
            );
            let expect = if f * 2 >= rows.len() {
                Verdict::Failing
            } else {
                Verdict::Passing
            };
            prop_assert_eq!(*label, expect);
        }
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[i][*feature] <= *threshold);
            prop_assert!(!l.is_empty() && !r.is_empty());
            let count = |s: &[usize]| {
                let f = s.iter().filter(|&&i| y[i].is_failing()).count();
                (f as f64, (s.len() - f) as f64)
            };
            prop_assert!(gini_mass(count(&l)) + gini_mass(count(&r)) <= gini_mass(counts) + 1e-9);
            check(left, x, y, &l)?;
            check(right, x, y, &r)?;
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trees_are_consistent_with_their_training_rows((x, y) in data(), seed in any::<u64>()) {
        let params = ForestParams { n_trees: 3, bootstrap: false, seed, ..ForestParams::default() };
        let model = train_forest(&x, &y, &params).unwrap();
        let rows: Vec<usize> = (0..x.len()).collect();
        for t in &model.trees {
            check(t, &x, &y, &rows)?;
            prop_assert_eq!(t.sample_size() as usize, x.len());
        }
    }

    #[test]
    fn full_depth_fits_distinct_rows((x, y) in data(), seed in any::<u64>()) {
        let d = x[0].len();
        let params = ForestParams { n_trees: 1, bootstrap: false, max_features: Some(d), seed, ..ForestParams::default() };
        let model = train_forest(&x, &y, &params).unwrap();
        for (i, row) in x.iter().enumerate() {
            let same: Vec<&Verdict> = x.iter().zip(&y).filter(|(r, _)| *r == row).map(|(_, v)| v).collect();
            if same.iter().all(|v| **v == y[i]) {
                prop_assert_eq!(model.trees[0].predict(row), y[i]);
            }
        }
    }

    #[test]
    fn same_seed_same_forest((x, y) in data(), seed in any::<u64>()) {
        let params = ForestParams { n_trees: 5, seed, ..ForestParams::default() };
        prop_assert_eq!(train_forest(&x, &y, &params).unwrap(), train_forest(&x, &y, &params).unwrap());
    }

    #[test]
    fn depth_limit_is_respected((x, y) in data(), depth in 0usize..4) {
        let params = ForestParams { n_trees: 4, max_depth: Some(depth), ..ForestParams::default() };
        let model = train_forest(&x, &y, &params).unwrap();
        for t in &model.trees {
            prop_assert!(t.depth() <= depth);
        }
    }
}
