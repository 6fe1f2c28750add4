//! Coverage runs: per-test execution traces, verdicts, the instrumented
//! statement universe and the ground-truth fault locations.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::rng::Fnv;

/// 1-based index into the instrumented statement universe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StatementId(pub u32);

impl StatementId {
    pub fn get(self) -> u32 {
        self.0
    }

    /// Zero-based position, for indexing per-statement arrays.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for StatementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Test outcome. Serialized as `-1` (passing) and `+1` (failing).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Verdict {
    Passing,
    Failing,
}

impl Verdict {
    pub fn encode(self) -> i8 {
        match self {
            Verdict::Passing => -1,
            Verdict::Failing => 1,
        }
    }

    pub fn decode(v: i64) -> Option<Self> {
        match v {
            -1 => Some(Verdict::Passing),
            1 => Some(Verdict::Failing),
            _ => None,
        }
    }

    pub fn is_failing(self) -> bool {
        self == Verdict::Failing
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Passing => f.write_str("-1"),
            Verdict::Failing => f.write_str("+1"),
        }
    }
}

impl Serialize for Verdict {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_i8(self.encode())
    }
}

impl<'de> Deserialize<'de> for Verdict {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = i64::deserialize(d)?;
        Verdict::decode(v).ok_or_else(|| serde::de::Error::custom("verdict must be -1 (passing) or +1 (failing)"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionTrace {
    pub test_id: String,
    /// Executed statements in order, with repetitions.
    pub sequence: Vec<StatementId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestCase {
    pub trace: ExecutionTrace,
    pub verdict: Verdict,
}

impl TestCase {
    pub fn new(test_id: impl Into<String>, verdict: Verdict, sequence: Vec<StatementId>) -> Self {
        TestCase {
            trace: ExecutionTrace {
                test_id: test_id.into(),
                sequence,
            },
            verdict,
        }
    }

    pub fn id(&self) -> &str {
        &self.trace.test_id
    }

    /// Distinct statements touched by the trace, ascending.
    pub fn covered(&self) -> Vec<StatementId> {
        let mut v = self.trace.sequence.clone();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Source location of an instrumented statement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Location {
    pub file: String,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpectraError {
    #[error("statement universe must contain at least one statement")]
    EmptyUniverse,
    #[error("test `{test_id}` references statement {statement}, outside 1..={statement_count}")]
    UnknownStatement {
        test_id: String,
        statement: u32,
        statement_count: u32,
    },
    #[error("run has no failing tests")]
    NoFailingTests,
    #[error("duplicate test id `{0}`")]
    DuplicateTestId(String),
    #[error("test id must be non-empty")]
    EmptyTestId,
    #[error("test `{0}` has an empty trace")]
    EmptyTrace(String),
    #[error("instrumentation references statement {0}, outside the declared universe")]
    InstrumentationOutOfRange(u32),
    #[error("instrumentation lists statement {0} twice")]
    DuplicateInstrumentation(u32),
    #[error("instrumentation is missing statement {0}")]
    IncompleteInstrumentation(u32),
    #[error("faulty statement set is empty")]
    NoFaults,
    #[error("faulty statement {0} is outside the declared universe")]
    FaultOutOfRange(u32),
}

/// A validated coverage run. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageRun {
    program_id: String,
    statement_count: u32,
    tests: Vec<TestCase>,
    instrumentation: BTreeMap<StatementId, Location>,
    faulty_statements: BTreeSet<StatementId>,
}

impl CoverageRun {
    /// Builds a run with ground-truth faults, which must be non-empty.
    pub fn new(
        program_id: impl Into<String>,
        statement_count: u32,
        tests: Vec<TestCase>,
        instrumentation: Vec<(StatementId, Location)>,
        faulty_statements: BTreeSet<StatementId>,
    ) -> Result<Self, SpectraError> {
        if faulty_statements.is_empty() {
            return Err(SpectraError::NoFaults);
        }
        Self::build(
            program_id.into(),
            statement_count,
            tests,
            instrumentation,
            faulty_statements,
        )
    }

    /// Builds a detection-only run. Cost evaluation on it reports
    /// [`SpectraError::NoFaults`].
    pub fn without_faults(
        program_id: impl Into<String>,
        statement_count: u32,
        tests: Vec<TestCase>,
        instrumentation: Vec<(StatementId, Location)>,
    ) -> Result<Self, SpectraError> {
        Self::build(
            program_id.into(),
            statement_count,
            tests,
            instrumentation,
            BTreeSet::new(),
        )
    }

    fn build(
        program_id: String,
        statement_count: u32,
        tests: Vec<TestCase>,
        instrumentation: Vec<(StatementId, Location)>,
        faulty_statements: BTreeSet<StatementId>,
    ) -> Result<Self, SpectraError> {
        if statement_count == 0 {
            return Err(SpectraError::EmptyUniverse);
        }
        let in_range = |s: StatementId| s.0 >= 1 && s.0 <= statement_count;

        let mut seen = BTreeSet::new();
        for t in &tests {
            if t.id().is_empty() {
                return Err(SpectraError::EmptyTestId);
            }
            if !seen.insert(t.id()) {
                return Err(SpectraError::DuplicateTestId(t.id().into()));
            }
            if t.trace.sequence.is_empty() {
                return Err(SpectraError::EmptyTrace(t.id().into()));
            }
            if let Some(bad) = t.trace.sequence.iter().find(|s| !in_range(**s)) {
                return Err(SpectraError::UnknownStatement {
                    test_id: t.id().into(),
                    statement: bad.0,
                    statement_count,
                });
            }
        }
        if !tests.iter().any(|t| t.verdict.is_failing()) {
            return Err(SpectraError::NoFailingTests);
        }

        let mut map = BTreeMap::new();
        for (id, loc) in instrumentation {
            if !in_range(id) {
                return Err(SpectraError::InstrumentationOutOfRange(id.0));
            }
            if map.insert(id, loc).is_some() {
                return Err(SpectraError::DuplicateInstrumentation(id.0));
            }
        }
        if let Some(missing) = (1..=statement_count).find(|s| !map.contains_key(&StatementId(*s))) {
            return Err(SpectraError::IncompleteInstrumentation(missing));
        }

        if let Some(bad) = faulty_statements.iter().find(|s| !in_range(**s)) {
            return Err(SpectraError::FaultOutOfRange(bad.0));
        }

        Ok(CoverageRun {
            program_id,
            statement_count,
            tests,
            instrumentation: map,
            faulty_statements,
        })
    }

    pub fn program_id(&self) -> &str {
        &self.program_id
    }

    pub fn statement_count(&self) -> u32 {
        self.statement_count
    }

    pub fn tests(&self) -> &[TestCase] {
        &self.tests
    }

    pub fn instrumentation(&self) -> &BTreeMap<StatementId, Location> {
        &self.instrumentation
    }

    pub fn faulty_statements(&self) -> &BTreeSet<StatementId> {
        &self.faulty_statements
    }

    pub fn test(&self, id: &str) -> Option<&TestCase> {
        self.tests.iter().find(|t| t.id() == id)
    }

    /// PT, in run order.
    pub fn passing(&self) -> impl Iterator<Item = &TestCase> + '_ {
        self.tests.iter().filter(|t| t.verdict == Verdict::Passing)
    }

    /// FT, in run order.
    pub fn failing(&self) -> impl Iterator<Item = &TestCase> + '_ {
        self.tests.iter().filter(|t| t.verdict == Verdict::Failing)
    }

    /// Content digest over program id, universe size, tests and verdicts.
    /// Faults are deliberately left out: detection must not depend on them.
    pub fn digest(&self) -> u64 {
        let mut h = Fnv::new();
        h.write_str(&self.program_id);
        h.write_u64(u64::from(self.statement_count));
        h.write_u64(self.tests.len() as u64);
        for t in &self.tests {
            h.write_str(t.id());
            h.write(&[t.verdict.encode() as u8]);
            h.write_u64(t.trace.sequence.len() as u64);
            for s in &t.trace.sequence {
                h.write(&s.0.to_le_bytes());
            }
        }
        h.finish()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub program_id: String,
    pub tests: usize,
    pub passing: usize,
    pub failing: usize,
    pub statements: u32,
    /// Statements executed by at least one test.
    pub executed_statements: usize,
    pub faults: usize,
    pub min_trace_len: usize,
    pub max_trace_len: usize,
    pub mean_trace_len: f64,
}

pub fn summarize(run: &CoverageRun) -> RunSummary {
    let lens = run.tests().iter().map(|t| t.trace.sequence.len());
    let total: usize = lens.clone().sum();
    let executed: BTreeSet<StatementId> = run
        .tests()
        .iter()
        .flat_map(|t| t.trace.sequence.iter().copied())
        .collect();
    RunSummary {
        program_id: run.program_id().into(),
        tests: run.tests().len(),
        passing: run.passing().count(),
        failing: run.failing().count(),
        statements: run.statement_count(),
        executed_statements: executed.len(),
        faults: run.faulty_statements().len(),
        min_trace_len: lens.clone().min().unwrap_or(0),
        max_trace_len: lens.max().unwrap_or(0),
        mean_trace_len: total as f64 / run.tests().len() as f64,
    }
}
