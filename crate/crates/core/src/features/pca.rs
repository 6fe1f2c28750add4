//! Principal component analysis over dense rows.
//!
//! Components come from the eigendecomposition of the sample covariance.
//! When there are fewer rows than columns the (much smaller) Gram matrix of
//! the centered rows is decomposed instead and its eigenvectors are mapped
//! back into column space; both routes span the same principal subspace.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureMatrix};

/// How `fraction` picks the number of retained components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcaMode {
    /// Smallest prefix whose cumulative explained-variance ratio reaches
    /// `fraction`.
    VarianceFraction,
    /// `ceil(fraction * input_dimension)` components.
    DimensionFraction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcaSettings {
    pub mode: PcaMode,
    pub fraction: f64,
}

impl Default for PcaSettings {
    fn default() -> Self {
        PcaSettings {
            mode: PcaMode::VarianceFraction,
            fraction: 0.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Orthonormal principal directions, by decreasing explained variance.
    pub components: Vec<Vec<f64>>,
    /// Variance along each retained component.
    pub explained_variance: Vec<f64>,
    /// Sum of the per-column sample variances of the fitted data.
    pub total_variance: f64,
    pub mode: PcaMode,
    pub fraction: f64,
}

/// Eigenvalues below this fraction of the largest are treated as zero.
const RANK_TOL: f64 = 1e-10;

pub fn fit_pca(matrix: &FeatureMatrix, mode: PcaMode, fraction: f64) -> Result<PcaModel, FeatureError> {
    PcaModel::fit(matrix.rows(), mode, fraction)
}

impl PcaModel {
    pub fn fit(rows: &[Vec<f64>], mode: PcaMode, fraction: f64) -> Result<Self, FeatureError> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(FeatureError::InvalidFraction(fraction));
        }
        let n = rows.len();
        if n < 2 {
            return Err(FeatureError::DegenerateInput(n));
        }
        let d = rows[0].len();
        if d == 0 {
            return Err(FeatureError::NoColumns);
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(FeatureError::DimensionMismatch {
                expected: d,
                actual: bad.len(),
            });
        }

        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let centered = DMatrix::from_fn(n, d, |i, j| rows[i][j] - mean[j]);
        let denom = (n - 1) as f64;
        let total_variance = centered.iter().map(|x| x * x).sum::<f64>() / denom;

        let base = PcaModel {
            mean,
            components: Vec::new(),
            explained_variance: Vec::new(),
            total_variance,
            mode,
            fraction,
        };

        if total_variance <= 0.0 {
            // Constant data: keep one arbitrary (first axis) direction.
            let mut e1 = vec![0.0; d];
            e1[0] = 1.0;
            return Ok(PcaModel {
                components: vec![e1],
                explained_variance: vec![0.0],
                ..base
            });
        }

        let dims_wanted = match mode {
            PcaMode::DimensionFraction => Some(ceil_count(fraction, d)),
            PcaMode::VarianceFraction => None,
        };

        if n < d {
            let gram = &centered * centered.transpose() / denom;
            let (values, vectors) = sorted_eigen(gram);
            let top = values[0];
            let rank = values.iter().take_while(|v| **v > top * RANK_TOL).count();
            let keep = dims_wanted.unwrap_or_else(|| variance_count(&values, total_variance, fraction));
            if keep <= rank {
                let mut comps = Vec::with_capacity(keep);
                for (j, value) in values.iter().take(keep).enumerate() {
                    let u = vectors.column(j);
                    let v = centered.transpose() * u / libm::sqrt(denom * value);
                    comps.push(v.iter().copied().collect::<Vec<f64>>());
                }
                orthonormalize(&mut comps);
                for c in &mut comps {
                    fix_sign(c);
                }
                return Ok(PcaModel {
                    components: comps,
                    explained_variance: values[..keep].to_vec(),
                    ..base
                });
            }
        }

        let cov = centered.transpose() * &centered / denom;
        let (values, vectors) = sorted_eigen(cov);
        let keep = dims_wanted.unwrap_or_else(|| variance_count(&values, total_variance, fraction));
        let components = (0..keep)
            .map(|j| {
                let mut c: Vec<f64> = vectors.column(j).iter().copied().collect();
                fix_sign(&mut c);
                c
            })
            .collect();
        Ok(PcaModel {
            components,
            explained_variance: values[..keep].to_vec(),
            ..base
        })
    }

    pub fn input_dimension(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dimension(&self) -> usize {
        self.components.len()
    }

    /// Share of the total variance captured by each retained component.
    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        if self.total_variance <= 0.0 {
            return vec![0.0; self.explained_variance.len()];
        }
        self.explained_variance
            .iter()
            .map(|v| v / self.total_variance)
            .collect()
    }

    /// `components · (row − mean)`.
    pub fn transform(&self, row: &[f64]) -> Result<Vec<f64>, FeatureError> {
        if row.len() != self.mean.len() {
            return Err(FeatureError::DimensionMismatch {
                expected: self.mean.len(),
                actual: row.len(),
            });
        }
        Ok(self
            .components
            .iter()
            .map(|c| {
                c.iter()
                    .zip(row.iter().zip(&self.mean))
                    .map(|(w, (x, m))| w * (x - m))
                    .sum()
            })
            .collect())
    }

    /// Maps projected coordinates back into input space.
    pub fn inverse_transform(&self, projected: &[f64]) -> Result<Vec<f64>, FeatureError> {
        if projected.len() != self.components.len() {
            return Err(FeatureError::DimensionMismatch {
                expected: self.components.len(),
                actual: projected.len(),
            });
        }
        let mut out = self.mean.clone();
        for (y, c) in projected.iter().zip(&self.components) {
            for (o, w) in out.iter_mut().zip(c) {
                *o += y * w;
            }
        }
        Ok(out)
    }
}

fn ceil_count(fraction: f64, d: usize) -> usize {
    // 0.6 * 5 is 3.0000000000000004 in binary floating point
    let raw = libm::ceil(fraction * d as f64 - 1e-9) as usize;
    raw.clamp(1, d)
}

fn variance_count(values: &[f64], total: f64, fraction: f64) -> usize {
    let target = fraction * total * (1.0 - 1e-12);
    let mut acc = 0.0;
    for (i, v) in values.iter().enumerate() {
        acc += v;
        if acc >= target {
            return i + 1;
        }
    }
    values.len()
}

/// Eigenpairs sorted by decreasing eigenvalue; negative round-off clamped to 0.
fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

/// Modified Gram-Schmidt, in place.
fn orthonormalize(vs: &mut [Vec<f64>]) {
    for i in 0..vs.len() {
        let (done, rest) = vs.split_at_mut(i);
        let v = &mut rest[0];
        for u in done.iter() {
            let dot: f64 = u.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
            for (x, y) in v.iter_mut().zip(u) {
                *x -= dot * y;
            }
        }
        let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

/// Makes the largest-magnitude entry positive so signs are reproducible.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}
