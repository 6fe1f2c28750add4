//! Random forest classifier over `Verdict` labels.
//!
//! Each tree is a CART tree grown on a bootstrap resample of the training
//! rows. A split tests `x[feature] <= threshold`, with thresholds at midpoints
//! between consecutive distinct values, and is chosen to minimize the
//! weighted Gini impurity of the two children among a random subset of
//! `max_features` features. Ties go to the lowest feature index, then the
//! lowest threshold.
//!
//! Tree `i` draws all of its randomness from ChaCha8 stream `i` under the
//! forest seed, so the model depends only on `(data, params, seed)`.

use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;
use crate::spectra::Verdict;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ForestError {
    #[error("training matrix is empty")]
    EmptyMatrix,
    #[error("training labels contain a single class")]
    SingleClassTraining,
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("expected a row of length {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid forest parameter: {0}")]
    InvalidParams(&'static str),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeight {
    #[default]
    None,
    /// Weight each class by `n / (2 * n_class)`.
    Balanced,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features sampled per split; `None` means `ceil(sqrt(d))`.
    pub max_features: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub class_weight: ClassWeight,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_features: None,
            max_depth: None,
            min_samples_split: 2,
            class_weight: ClassWeight::None,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub failing: u32,
    pub passing: u32,
}

impl ClassCounts {
    pub fn total(&self) -> u32 {
        self.failing + self.passing
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        label: Verdict,
        counts: ClassCounts,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict(&self, row: &[f64]) -> Verdict {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { label, .. } => return *label,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Sum of leaf class counts, i.e. the size of the training sample.
    pub fn sample_size(&self) -> u32 {
        match self {
            TreeNode::Leaf { counts, .. } => counts.total(),
            TreeNode::Split { left, right, .. } => left.sample_size() + right.sample_size(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeNode>,
    pub n_trees: usize,
    /// Resolved per-split feature sample size.
    pub max_features: usize,
    pub seed: u64,
    pub dimension: usize,
}

impl ForestModel {
    /// `(votes_fail, votes_pass)` over all trees.
    pub fn predict_votes(&self, row: &[f64]) -> Result<(usize, usize), ForestError> {
        if row.len() != self.dimension {
            return Err(ForestError::DimensionMismatch {
                expected: self.dimension,
                actual: row.len(),
            });
        }
        let fail = self.trees.iter().filter(|t| t.predict(row).is_failing()).count();
        Ok((fail, self.trees.len() - fail))
    }

    /// Majority over tree votes; an exact tie is `Failing`.
    pub fn predict(&self, row: &[f64]) -> Result<Verdict, ForestError> {
        let (fail, pass) = self.predict_votes(row)?;
        Ok(majority(fail, pass))
    }
}

fn majority(fail: usize, pass: usize) -> Verdict {
    if fail >= pass {
        Verdict::Failing
    } else {
        Verdict::Passing
    }
}

/// Growth limits for a single tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_features: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Weights of the failing and passing class.
    pub weights: [f64; 2],
}

pub fn train_forest(x: &[Vec<f64>], y: &[Verdict], params: &ForestParams) -> Result<ForestModel, ForestError> {
    let d = validate(x, y)?;
    if params.n_trees == 0 {
        return Err(ForestError::InvalidParams("n_trees must be positive"));
    }
    if params.min_samples_split < 2 {
        return Err(ForestError::InvalidParams("min_samples_split must be at least 2"));
    }
    let max_features = match params.max_features {
        Some(0) => return Err(ForestError::InvalidParams("max_features must be positive")),
        Some(m) if m > d => return Err(ForestError::InvalidParams("max_features exceeds dimension")),
        Some(m) => m,
        None => default_max_features(d),
    };
    let tree_params = TreeParams {
        max_features,
        max_depth: params.max_depth,
        min_samples_split: params.min_samples_split,
        weights: class_weights(y, params.class_weight),
    };

    let n = x.len();
    let trees = (0..params.n_trees)
        .map(|i| {
            let mut rng = rng::stream(params.seed, i as u64);
            let sample: Vec<usize> = if params.bootstrap {
                bootstrap_sample(n, &mut rng)
            } else {
                (0..n).collect()
            };
            grow(x, y, sample, &tree_params, &mut rng)
        })
        .collect();

    Ok(ForestModel {
        trees,
        n_trees: params.n_trees,
        max_features,
        seed: params.seed,
        dimension: d,
    })
}

/// Grows one tree on the rows listed in `sample` (repeats allowed), drawing
/// feature subsets from ChaCha8 stream `stream` under `seed`.
pub fn fit_tree(
    x: &[Vec<f64>],
    y: &[Verdict],
    sample: &[usize],
    params: &TreeParams,
    seed: u64,
    stream: u64,
) -> Result<TreeNode, ForestError> {
    let d = validate(x, y)?;
    if params.max_features == 0 || params.max_features > d {
        return Err(ForestError::InvalidParams("max_features must lie in 1..=dimension"));
    }
    if sample.is_empty() {
        return Err(ForestError::EmptyMatrix);
    }
    let mut rng = rng::stream(seed, stream);
    Ok(grow(x, y, sample.to_vec(), params, &mut rng))
}

pub fn default_max_features(d: usize) -> usize {
    (libm::ceil(libm::sqrt(d as f64)) as usize).clamp(1, d.max(1))
}

/// Indices of `n` draws with replacement.
pub fn bootstrap_indices(n: usize, seed: u64, stream: u64) -> Vec<usize> {
    bootstrap_sample(n, &mut rng::stream(seed, stream))
}

fn bootstrap_sample(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

fn validate(x: &[Vec<f64>], y: &[Verdict]) -> Result<usize, ForestError> {
    if x.is_empty() {
        return Err(ForestError::EmptyMatrix);
    }
    if x.len() != y.len() {
        return Err(ForestError::LengthMismatch {
            rows: x.len(),
            labels: y.len(),
        });
    }
    let d = x[0].len();
    if d == 0 {
        return Err(ForestError::EmptyMatrix);
    }
    if let Some(r) = x.iter().find(|r| r.len() != d) {
        return Err(ForestError::DimensionMismatch {
            expected: d,
            actual: r.len(),
        });
    }
    let fails = y.iter().filter(|v| v.is_failing()).count();
    if fails == 0 || fails == y.len() {
        return Err(ForestError::SingleClassTraining);
    }
    Ok(d)
}

fn class_weights(y: &[Verdict], mode: ClassWeight) -> [f64; 2] {
    match mode {
        ClassWeight::None => [1.0, 1.0],
        ClassWeight::Balanced => {
            let n = y.len() as f64;
            let fail = y.iter().filter(|v| v.is_failing()).count() as f64;
            let pass = n - fail;
            [n / (2.0 * fail), n / (2.0 * pass)]
        }
    }
}

/// A chosen split. `score` is `sum over children of (w_f^2 + w_p^2) / w`,
/// which grows as the weighted Gini impurity of the children shrinks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub score: f64,
}

fn is_better(candidate: f64, best: f64) -> bool {
    candidate > best + 1e-12 * best.abs().max(1.0)
}

/// Best split of `sample` on `feature`, or `None` when it is constant there.
pub fn best_threshold(
    x: &[Vec<f64>],
    y: &[Verdict],
    sample: &[usize],
    feature: usize,
    weights: [f64; 2],
) -> Option<SplitChoice> {
    let mut pts: Vec<(f64, Verdict)> = sample.iter().map(|&i| (x[i][feature], y[i])).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut total = [0.0f64; 2];
    for (_, v) in &pts {
        total[class_slot(*v)] += weights[class_slot(*v)];
    }
    let mut left = [0.0f64; 2];
    let mut best: Option<SplitChoice> = None;
    for i in 0..pts.len() - 1 {
        let (value, label) = pts[i];
        left[class_slot(label)] += weights[class_slot(label)];
        let next = pts[i + 1].0;
        if next <= value {
            continue;
        }
        let right = [total[0] - left[0], total[1] - left[1]];
        let score = purity(left) + purity(right);
        let mut threshold = value + (next - value) / 2.0;
        if threshold >= next {
            threshold = value;
        }
        if best.is_none_or(|b| is_better(score, b.score)) {
            best = Some(SplitChoice {
                feature,
                threshold,
                score,
            });
        }
    }
    best
}

fn purity(w: [f64; 2]) -> f64 {
    let n = w[0] + w[1];
    if n <= 0.0 {
        0.0
    } else {
        (w[0] * w[0] + w[1] * w[1]) / n
    }
}

fn class_slot(v: Verdict) -> usize {
    match v {
        Verdict::Failing => 0,
        Verdict::Passing => 1,
    }
}

fn grow(x: &[Vec<f64>], y: &[Verdict], sample: Vec<usize>, params: &TreeParams, rng: &mut ChaCha8Rng) -> TreeNode {
    let d = x[0].len();
    let mut order: Vec<usize> = (0..d).collect();
    build(x, y, sample, 0, params, rng, &mut order)
}

fn build(
    x: &[Vec<f64>],
    y: &[Verdict],
    sample: Vec<usize>,
    depth: usize,
    params: &TreeParams,
    rng: &mut ChaCha8Rng,
    order: &mut [usize],
) -> TreeNode {
    let mut counts = ClassCounts::default();
    let mut weighted = [0.0f64; 2];
    for &i in &sample {
        match y[i] {
            Verdict::Failing => counts.failing += 1,
            Verdict::Passing => counts.passing += 1,
        }
        weighted[class_slot(y[i])] += params.weights[class_slot(y[i])];
    }
    let label = if weighted[0] >= weighted[1] {
        Verdict::Failing
    } else {
        Verdict::Passing
    };
    let leaf = TreeNode::Leaf { label, counts };

    let pure = counts.failing == 0 || counts.passing == 0;
    let too_deep = params.max_depth.is_some_and(|m| depth >= m);
    if pure || too_deep || sample.len() < params.min_samples_split {
        return leaf;
    }

    // Walk a fresh random feature order, skipping features that are constant
    // on this node, until max_features candidates have been drawn.
    order.shuffle(rng);
    let mut candidates: Vec<SplitChoice> = Vec::with_capacity(params.max_features);
    for &f in order.iter() {
        if let Some(c) = best_threshold(x, y, &sample, f, params.weights) {
            candidates.push(c);
            if candidates.len() == params.max_features {
                break;
            }
        }
    }
    candidates.sort_by_key(|c| c.feature);
    let mut best: Option<SplitChoice> = None;
    for c in candidates {
        if best.is_none_or(|b| is_better(c.score, b.score)) {
            best = Some(c);
        }
    }
    let Some(split) = best else {
        return leaf;
    };

    let (l, r): (Vec<usize>, Vec<usize>) = sample.iter().partition(|&&i| x[i][split.feature] <= split.threshold);
    TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(build(x, y, l, depth + 1, params, rng, order)),
        right: Box::new(build(x, y, r, depth + 1, params, rng, order)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use Verdict::{Failing as F, Passing as P};

    fn separable() -> (Vec<Vec<f64>>, Vec<Verdict>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..5 {
            x.push(vec![0.0]);
            y.push(P);
            x.push(vec![10.0]);
            y.push(F);
        }
        (x, y)
    }

    #[test]
    fn separable_data_is_fit_exactly() {
        let (x, y) = separable();
        let m = train_forest(
            &x,
            &y,
            &ForestParams {
                n_trees: 10,
                seed: 3,
                ..Default::default()
            },
        )
        .unwrap();
        for (r, v) in x.iter().zip(&y) {
            assert_eq!(m.predict(r).unwrap(), *v);
        }
    }

    #[test]
    fn same_seed_same_model() {
        let (x, y) = separable();
        let p = ForestParams {
            n_trees: 7,
            seed: 99,
            ..Default::default()
        };
        assert_eq!(train_forest(&x, &y, &p).unwrap(), train_forest(&x, &y, &p).unwrap());
    }

    #[test]
    fn bootstrap_has_n_draws() {
        let (x, y) = separable();
        let m = train_forest(
            &x,
            &y,
            &ForestParams {
                n_trees: 5,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(m.trees.iter().all(|t| t.sample_size() == 10));
        assert_eq!(bootstrap_indices(13, 1, 2).len(), 13);
    }

    #[test]
    fn votes_and_ties() {
        let leaf = |v| TreeNode::Leaf {
            label: v,
            counts: ClassCounts { failing: 1, passing: 1 },
        };
        let mk = |trees: Vec<TreeNode>| ForestModel {
            n_trees: trees.len(),
            trees,
            max_features: 1,
            seed: 0,
            dimension: 1,
        };
        assert_eq!(mk(vec![leaf(F)]).predict(&[3.0]).unwrap(), F);
        assert_eq!(mk(vec![leaf(P), leaf(P), leaf(F)]).predict(&[0.0]).unwrap(), P);
        let tie = mk(vec![leaf(P), leaf(F)]);
        assert_eq!(tie.predict_votes(&[0.0]).unwrap(), (1, 1));
        assert_eq!(tie.predict(&[0.0]).unwrap(), F);
        assert_eq!(
            tie.predict(&[0.0, 1.0]),
            Err(ForestError::DimensionMismatch { expected: 1, actual: 2 })
        );
    }

    #[test]
    fn rejects_bad_training_input() {
        let x = vec![vec![1.0], vec![2.0]];
        assert_eq!(
            train_forest(&x, &[P, P], &ForestParams::default()),
            Err(ForestError::SingleClassTraining)
        );
        assert_eq!(
            train_forest(&[], &[], &ForestParams::default()),
            Err(ForestError::EmptyMatrix)
        );
        assert_eq!(
            train_forest(&x, &[P], &ForestParams::default()),
            Err(ForestError::LengthMismatch { rows: 2, labels: 1 })
        );
        assert!(matches!(
            train_forest(
                &x,
                &[P, F],
                &ForestParams {
                    max_features: Some(2),
                    ..Default::default()
                }
            ),
            Err(ForestError::InvalidParams(_))
        ));
    }

    #[test]
    fn midpoint_threshold_and_tie_break() {
        // both features separate perfectly; feature 0 wins the tie
        let x = vec![vec![1.0, 5.0], vec![3.0, 7.0]];
        let y = vec![P, F];
        let p = TreeParams {
            max_features: 2,
            max_depth: Some(1),
            min_samples_split: 2,
            weights: [1.0, 1.0],
        };
        let t = fit_tree(&x, &y, &[0, 1], &p, 0, 0).unwrap();
        match t {
            TreeNode::Split { feature, threshold, .. } => {
                assert_eq!(feature, 0);
                assert_eq!(threshold, 2.0);
            }
            other => panic!("expected split, got {other:?}"),
        }
    }

    #[test]
    fn constant_features_yield_leaf() {
        let x = vec![vec![1.0], vec![1.0], vec![1.0]];
        let y = vec![P, F, F];
        let p = TreeParams {
            max_features: 1,
            max_depth: None,
            min_samples_split: 2,
            weights: [1.0, 1.0],
        };
        let t = fit_tree(&x, &y, &[0, 1, 2], &p, 0, 0).unwrap();
        assert_eq!(
            t,
            TreeNode::Leaf {
                label: F,
                counts: ClassCounts { failing: 2, passing: 1 }
            }
        );
    }

    #[test]
    fn balanced_weights_equalize_class_mass() {
        let y = vec![P, P, P, F];
        let w = class_weights(&y, ClassWeight::Balanced);
        assert_eq!(w[0], 2.0);
        assert!((3.0 * w[1] - w[0]).abs() < 1e-12);
        assert_eq!(class_weights(&y, ClassWeight::None), [1.0, 1.0]);
    }
}
