//! Spectrum-based fault localization and the cost of flipping or trimming
//! detected CC tests.
//!
//! Coverage here is binary: a statement is covered by a test if it appears
//! anywhere in the test's trace.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectra::{CoverageRun, StatementId, TestCase, Verdict};

/// Scores closer than this are treated as tied when ranking.
pub const TIE_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LocalizationError {
    #[error("no failing tests in the effective suite")]
    NoFailingTests,
    #[error("run has no faulty statements to localize")]
    NoFaults,
    #[error("faulty statement {0} is outside the statement universe")]
    FaultOutOfRange(u32),
    #[error("unknown test id `{0}`")]
    UnknownTestId(String),
    #[error("test `{0}` is not a passing test")]
    NotPassing(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula {
    #[default]
    Ochiai,
    Tarantula,
}

/// How statements tied with the target are counted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    /// The target is examined last among its ties.
    #[default]
    Worst,
    /// The target is examined first among its ties.
    Best,
    Average,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    None,
    /// Relabel CC tests as failing.
    Flip,
    /// Drop CC tests from the suite.
    Trim,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// One cost per single-test change.
    OneAtATime,
    /// A single cost with every change applied.
    AllAtOnce,
    #[default]
    Both,
}

impl Variant {
    fn one(self) -> bool {
        matches!(self, Variant::OneAtATime | Variant::Both)
    }

    fn all(self) -> bool {
        matches!(self, Variant::AllAtOnce | Variant::Both)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatementCounts {
    pub ef: u32,
    pub ep: u32,
    pub nf: u32,
    pub np: u32,
}

/// Per-statement hit spectra of a suite.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectraCounts {
    /// Index `i` describes statement `i + 1`.
    pub statements: Vec<StatementCounts>,
    pub failing: u32,
    pub passing: u32,
}

impl SpectraCounts {
    /// Builds counts from `(covered statements, verdict)` pairs. Covered
    /// statements must be distinct.
    pub fn from_coverage<'a, I>(statement_count: u32, tests: I) -> Self
    where
        I: IntoIterator<Item = (&'a [StatementId], Verdict)>,
    {
        let mut ef = vec![0u32; statement_count as usize];
        let mut ep = vec![0u32; statement_count as usize];
        let (mut failing, mut passing) = (0u32, 0u32);
        for (covered, verdict) in tests {
            let slot = match verdict {
                Verdict::Failing => {
                    failing += 1;
                    &mut ef
                }
                Verdict::Passing => {
                    passing += 1;
                    &mut ep
                }
            };
            for s in covered {
                slot[s.index()] += 1;
            }
        }
        let statements = ef
            .iter()
            .zip(&ep)
            .map(|(&ef, &ep)| StatementCounts {
                ef,
                ep,
                nf: failing - ef,
                np: passing - ep,
            })
            .collect();
        SpectraCounts {
            statements,
            failing,
            passing,
        }
    }

    pub fn from_run(run: &CoverageRun) -> Self {
        let cov: Vec<Vec<StatementId>> = run.tests().iter().map(TestCase::covered).collect();
        SpectraCounts::from_coverage(
            run.statement_count(),
            cov.iter().zip(run.tests()).map(|(c, t)| (c.as_slice(), t.verdict)),
        )
    }
}

pub fn ochiai(c: &StatementCounts, failing: u32) -> f64 {
    if c.ef == 0 {
        return 0.0;
    }
    f64::from(c.ef) / libm::sqrt(f64::from(failing) * f64::from(c.ef + c.ep))
}

pub fn tarantula(c: &StatementCounts, failing: u32, passing: u32) -> f64 {
    if c.ef == 0 {
        return 0.0;
    }
    let f = f64::from(c.ef) / f64::from(failing);
    let p = if passing == 0 {
        0.0
    } else {
        f64::from(c.ep) / f64::from(passing)
    };
    f / (f + p)
}

/// Per-statement suspiciousness, indexed like `counts.statements`.
pub fn suspiciousness(counts: &SpectraCounts, formula: Formula) -> Result<Vec<f64>, LocalizationError> {
    if counts.failing == 0 {
        return Err(LocalizationError::NoFailingTests);
    }
    Ok(counts
        .statements
        .iter()
        .map(|c| match formula {
            Formula::Ochiai => ochiai(c, counts.failing),
            Formula::Tarantula => tarantula(c, counts.failing, counts.passing),
        })
        .collect())
}

/// Fraction of statements examined, in decreasing suspiciousness, until the
/// best-ranked faulty statement is reached. The target always counts, so the
/// minimum is `1 / statement_count`.
pub fn rank_cost(scores: &[f64], faults: &BTreeSet<StatementId>, tie: TiePolicy) -> Result<f64, LocalizationError> {
    if faults.is_empty() {
        return Err(LocalizationError::NoFaults);
    }
    let mut target = f64::NEG_INFINITY;
    for f in faults {
        let s = *scores.get(f.index()).ok_or(LocalizationError::FaultOutOfRange(f.0))?;
        target = target.max(s);
    }
    let ahead = scores.iter().filter(|s| **s > target + TIE_EPSILON).count();
    let tied = scores.iter().filter(|s| (**s - target).abs() <= TIE_EPSILON).count();
    let examined = match tie {
        TiePolicy::Worst => (ahead + tied) as f64,
        TiePolicy::Best => (ahead + 1) as f64,
        TiePolicy::Average => ahead as f64 + (tied as f64 + 1.0) / 2.0,
    };
    Ok(examined / scores.len() as f64)
}

pub fn cost(
    counts: &SpectraCounts,
    faults: &BTreeSet<StatementId>,
    formula: Formula,
    tie: TiePolicy,
) -> Result<f64, LocalizationError> {
    let scores = suspiciousness(counts, formula)?;
    rank_cost(&scores, faults, tie)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub formula: Formula,
    pub tie_policy: TiePolicy,
    pub strategy: Strategy,
    pub original_cost: f64,
    /// Distinct one-at-a-time costs, ascending. `None` when not requested.
    pub one_at_a_time: Option<Vec<f64>>,
    pub all_at_once: Option<f64>,
    /// One-at-a-time cost per changed test.
    pub per_change: BTreeMap<String, f64>,
}

/// The suite as seen by the localizer after a strategy is applied to
/// `changed`.
fn effective_counts(
    run: &CoverageRun,
    coverage: &[Vec<StatementId>],
    changed: &BTreeSet<&str>,
    strategy: Strategy,
) -> SpectraCounts {
    let view = run.tests().iter().zip(coverage).filter_map(|(t, cov)| {
        if !changed.contains(t.id()) {
            return Some((cov.as_slice(), t.verdict));
        }
        match strategy {
            Strategy::None => Some((cov.as_slice(), t.verdict)),
            Strategy::Flip => Some((cov.as_slice(), Verdict::Failing)),
            Strategy::Trim => None,
        }
    });
    SpectraCounts::from_coverage(run.statement_count(), view)
}

/// Cost of the original suite and of the suite with `ct` flipped or trimmed.
pub fn apply_strategy(
    run: &CoverageRun,
    ct: &BTreeSet<String>,
    strategy: Strategy,
    variant: Variant,
    formula: Formula,
    tie: TiePolicy,
) -> Result<CostReport, LocalizationError> {
    for id in ct {
        match run.test(id) {
            None => return Err(LocalizationError::UnknownTestId(id.clone())),
            Some(t) if t.verdict != Verdict::Passing => return Err(LocalizationError::NotPassing(id.clone())),
            Some(_) => {}
        }
    }
    let faults = run.faulty_statements();
    let coverage: Vec<Vec<StatementId>> = run.tests().iter().map(TestCase::covered).collect();
    let eval = |changed: &BTreeSet<&str>, strategy: Strategy| {
        cost(
            &effective_counts(run, &coverage, changed, strategy),
            faults,
            formula,
            tie,
        )
    };

    let original_cost = eval(&BTreeSet::new(), Strategy::None)?;

    let mut per_change = BTreeMap::new();
    let one_at_a_time = if variant.one() {
        for id in ct {
            let single: BTreeSet<&str> = [id.as_str()].into_iter().collect();
            per_change.insert(id.clone(), eval(&single, strategy)?);
        }
        let mut distinct: Vec<f64> = per_change.values().copied().collect();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        Some(distinct)
    } else {
        None
    };

    let all_at_once = if variant.all() {
        let all: BTreeSet<&str> = ct.iter().map(String::as_str).collect();
        Some(eval(&all, strategy)?)
    } else {
        None
    };

    Ok(CostReport {
        formula,
        tie_policy: tie,
        strategy,
        original_cost,
        one_at_a_time,
        all_at_once,
        per_change,
    })
}
