//! Combo-k feature vectors.
//!
//! A combo-k key is a run of `k` consecutive statements in an execution
//! trace. A test's feature vector holds, per key, how often that run occurs
//! in its trace (a sliding window, so windows overlap).

mod pca;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use pca::{fit_pca, PcaMode, PcaModel, PcaSettings};

use crate::spectra::{CoverageRun, StatementId, TestCase};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("combo size must be 1, 2 or 3, got {0}")]
    InvalidCombo(u8),
    #[error("PCA needs at least 2 rows, got {0}")]
    DegenerateInput(usize),
    #[error("PCA needs at least one column")]
    NoColumns,
    #[error("fraction must lie in (0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("expected a row of length {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
}

/// Window length for combo features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Combo {
    One,
    Two,
    Three,
}

impl Combo {
    pub const ALL: [Combo; 3] = [Combo::One, Combo::Two, Combo::Three];

    pub fn new(k: u8) -> Result<Self, FeatureError> {
        match k {
            1 => Ok(Combo::One),
            2 => Ok(Combo::Two),
            3 => Ok(Combo::Three),
            other => Err(FeatureError::InvalidCombo(other)),
        }
    }

    pub fn k(self) -> usize {
        match self {
            Combo::One => 1,
            Combo::Two => 2,
            Combo::Three => 3,
        }
    }
}

impl TryFrom<u8> for Combo {
    type Error = FeatureError;
    fn try_from(k: u8) -> Result<Self, Self::Error> {
        Combo::new(k)
    }
}

impl From<Combo> for u8 {
    fn from(c: Combo) -> u8 {
        c.k() as u8
    }
}

impl fmt::Display for Combo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "combo{}", self.k())
    }
}

/// An ordered tuple of 1 to 3 statements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ComboKey {
    len: u8,
    ids: [StatementId; 3],
}

impl ComboKey {
    /// Panics if `window` is empty or longer than 3.
    pub fn new(window: &[StatementId]) -> Self {
        assert!((1..=3).contains(&window.len()), "combo key of length {}", window.len());
        let mut ids = [StatementId(0); 3];
        ids[..window.len()].copy_from_slice(window);
        ComboKey {
            len: window.len() as u8,
            ids,
        }
    }

    pub fn statements(&self) -> &[StatementId] {
        &self.ids[..self.len as usize]
    }

    pub fn k(&self) -> usize {
        self.len as usize
    }
}

impl Ord for ComboKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.statements().cmp(other.statements())
    }
}

impl PartialOrd for ComboKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Renders as `s1`, `s1|s2` or `s1|s2|s3`.
impl fmt::Display for ComboKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.statements().iter().enumerate() {
            if i > 0 {
                f.write_str("|")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// Sliding-window counts of every combo-k key in `sequence`.
pub fn combo_counts(sequence: &[StatementId], combo: Combo) -> BTreeMap<ComboKey, u32> {
    let mut counts = BTreeMap::new();
    for w in sequence.windows(combo.k()) {
        *counts.entry(ComboKey::new(w)).or_insert(0) += 1;
    }
    counts
}

/// Dense test-by-combo matrix.
///
/// Columns are the keys observed in the source traces, in lexicographic
/// order. Rows follow the order of the source tests. Once a PCA model is
/// attached, `rows` hold projected coordinates while `columns` still describe
/// the raw input space used by [`FeatureMatrix::featurize`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    combo: Combo,
    test_ids: Vec<String>,
    columns: Vec<ComboKey>,
    column_index: BTreeMap<ComboKey, usize>,
    rows: Vec<Vec<f64>>,
    pca: Option<PcaModel>,
}

impl FeatureMatrix {
    pub fn from_tests<'a>(tests: impl IntoIterator<Item = &'a TestCase>, combo: Combo) -> Self {
        let per_test: Vec<(String, BTreeMap<ComboKey, u32>)> = tests
            .into_iter()
            .map(|t| (t.id().into(), combo_counts(&t.trace.sequence, combo)))
            .collect();

        let mut column_index = BTreeMap::new();
        for (_, counts) in &per_test {
            for key in counts.keys() {
                column_index.entry(*key).or_insert(0);
            }
        }
        let columns: Vec<ComboKey> = column_index.keys().copied().collect();
        for (i, v) in column_index.values_mut().enumerate() {
            *v = i;
        }

        let mut test_ids = Vec::with_capacity(per_test.len());
        let mut rows = Vec::with_capacity(per_test.len());
        for (id, counts) in per_test {
            let mut row = vec![0.0; columns.len()];
            for (key, c) in counts {
                row[column_index[&key]] = f64::from(c);
            }
            test_ids.push(id);
            rows.push(row);
        }

        FeatureMatrix {
            combo,
            test_ids,
            columns,
            column_index,
            rows,
            pca: None,
        }
    }

    pub fn combo(&self) -> Combo {
        self.combo
    }

    pub fn test_ids(&self) -> &[String] {
        &self.test_ids
    }

    pub fn columns(&self) -> &[ComboKey] {
        &self.columns
    }

    pub fn column_of(&self, key: &ComboKey) -> Option<usize> {
        self.column_index.get(key).copied()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn pca(&self) -> Option<&PcaModel> {
        self.pca.as_ref()
    }

    /// Width of `rows`.
    pub fn dimension(&self) -> usize {
        match &self.pca {
            Some(m) => m.output_dimension(),
            None => self.columns.len(),
        }
    }

    /// Raw count vector of `sequence` over this matrix's columns. Keys the
    /// matrix never saw are dropped.
    pub fn encode(&self, sequence: &[StatementId]) -> Vec<f64> {
        let mut row = vec![0.0; self.columns.len()];
        for w in sequence.windows(self.combo.k()) {
            if let Some(&c) = self.column_index.get(&ComboKey::new(w)) {
                row[c] += 1.0;
            }
        }
        row
    }

    /// Encodes `sequence` into the same space as `rows`, applying the PCA
    /// projection when one is attached.
    pub fn featurize(&self, sequence: &[StatementId]) -> Vec<f64> {
        let raw = self.encode(sequence);
        match &self.pca {
            Some(m) => m.transform(&raw).expect("encode yields model input dimension"),
            None => raw,
        }
    }

    /// Fits PCA on the raw rows and replaces them with their projections.
    pub fn project(mut self, settings: PcaSettings) -> Result<Self, FeatureError> {
        assert!(self.pca.is_none(), "matrix is already projected");
        let model = PcaModel::fit(&self.rows, settings.mode, settings.fraction)?;
        self.rows = self.rows.iter().map(|r| model.transform(r)).collect::<Result<_, _>>()?;
        self.pca = Some(model);
        Ok(self)
    }
}

/// Combo-k matrix over every test of `run`, in run order.
pub fn build_features(run: &CoverageRun, combo: Combo) -> FeatureMatrix {
    FeatureMatrix::from_tests(run.tests(), combo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::Verdict;
    use alloc::string::ToString;

    fn seq(v: &[u32]) -> Vec<StatementId> {
        v.iter().map(|s| StatementId(*s)).collect()
    }

    fn key(v: &[u32]) -> ComboKey {
        ComboKey::new(&seq(v))
    }

    #[test]
    fn combo1_counts_occurrences() {
        let t = TestCase::new("t1", Verdict::Passing, seq(&[1, 2, 5, 6, 5, 2]));
        let m = FeatureMatrix::from_tests([&t], Combo::One);
        let got: Vec<(u32, f64)> = m
            .columns()
            .iter()
            .map(|k| k.statements()[0].0)
            .zip(m.rows()[0].iter().copied())
            .collect();
        assert_eq!(got, vec![(1, 1.0), (2, 2.0), (5, 2.0), (6, 1.0)]);
        // statements 3, 4 and 7 never occur: encoding a trace over them gives zeros
        assert_eq!(m.encode(&seq(&[3, 4, 7])), vec![0.0; 4]);
    }

    #[test]
    fn short_traces_have_no_pairs() {
        assert!(combo_counts(&seq(&[3]), Combo::Two).is_empty());
        let c = combo_counts(&seq(&[1, 1, 1]), Combo::Two);
        assert_eq!(c.get(&key(&[1, 1])), Some(&2));
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn columns_are_lexicographic_and_test_only_keys_dropped() {
        let a = TestCase::new("a", Verdict::Passing, seq(&[3, 1, 2]));
        let b = TestCase::new("b", Verdict::Failing, seq(&[1, 2, 3]));
        let m = FeatureMatrix::from_tests([&a, &b], Combo::Two);
        assert_eq!(m.columns(), &[key(&[1, 2]), key(&[2, 3]), key(&[3, 1])]);
        assert_eq!(m.rows(), &[vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]]);
        assert_eq!(m.encode(&seq(&[2, 3, 9, 9])), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn key_display_and_ordering() {
        assert_eq!(key(&[1, 12, 3]).to_string(), "1|12|3");
        assert!(key(&[1, 2]) < key(&[1, 3]));
        assert!(key(&[2, 1]) > key(&[1, 9]));
        assert_eq!(Combo::new(4), Err(FeatureError::InvalidCombo(4)));
    }

    #[test]
    fn project_attaches_model_and_featurize_matches_rows() {
        let tests = [
            TestCase::new("a", Verdict::Passing, seq(&[1, 2, 2])),
            TestCase::new("b", Verdict::Passing, seq(&[1, 3])),
            TestCase::new("c", Verdict::Failing, seq(&[2, 3, 3, 3])),
        ];
        let m = FeatureMatrix::from_tests(tests.iter(), Combo::One)
            .project(PcaSettings {
                mode: PcaMode::DimensionFraction,
                fraction: 1.0,
            })
            .unwrap();
        assert_eq!(m.dimension(), 3);
        for (t, row) in tests.iter().zip(m.rows()) {
            let f = m.featurize(&t.trace.sequence);
            for (x, y) in f.iter().zip(row) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
