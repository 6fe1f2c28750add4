//! Synthetic coverage runs with known coincidentally correct tests.
//!
//! The program is a universe of statements with `fault_count` faulty ones.
//! Every fault sits inside a loop body of four fixed companion statements,
//! `c1, c2, fault, c3, c4`, and the *signature* of a fault is that body run
//! for two to four iterations. Around it, traces are filled with a background
//! walk over the non-faulty statements that mostly steps to the next
//! statement and sometimes jumps.
//!
//! - failing tests carry a full signature of one fault;
//! - CC tests carry a signature too, but every iteration past the second is
//!   kept only with probability `signature_strength`;
//! - clean passing tests never touch a faulty statement.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::DetectionReport;
use crate::rng;
use crate::spectra::{CoverageRun, Location, StatementId, TestCase, Verdict};

const MIN_REPS: usize = 2;
const SIGNATURE_REPS: usize = 4;
const COMPANIONS: usize = 4;
const SIGNATURE_LEN: usize = (COMPANIONS + 1) * SIGNATURE_REPS;
/// Probability that the background walk steps to the next statement.
const STEP_PROB: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("infeasible simulation parameters: {0}")]
    InfeasibleParams(String),
    #[error("run mismatch: {0}")]
    RunMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    pub statement_count: u32,
    pub n_passing: usize,
    pub n_failing: usize,
    /// Share of passing tests that are CC; `floor(cc_rate * n_passing)` are
    /// injected.
    pub cc_rate: f64,
    pub fault_count: usize,
    pub min_trace_len: usize,
    pub max_trace_len: usize,
    pub signature_strength: f64,
    pub seed: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            statement_count: 60,
            n_passing: 200,
            n_failing: 20,
            cc_rate: 0.1,
            fault_count: 1,
            min_trace_len: 25,
            max_trace_len: 60,
            signature_strength: 0.8,
            seed: 0,
        }
    }
}

impl SimParams {
    pub fn cc_count(&self) -> usize {
        libm::floor(self.cc_rate * self.n_passing as f64) as usize
    }

    fn validate(&self) -> Result<(), SimError> {
        let fail = |m: String| Err(SimError::InfeasibleParams(m));
        if self.n_failing == 0 {
            return fail("n_failing must be at least 1".into());
        }
        if self.n_passing == 0 {
            return fail("n_passing must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.cc_rate) {
            return fail(format!("cc_rate {} outside [0, 1)", self.cc_rate));
        }
        if !(self.signature_strength > 0.0 && self.signature_strength <= 1.0) {
            return fail(format!("signature_strength {} outside (0, 1]", self.signature_strength));
        }
        if self.fault_count == 0 {
            return fail("fault_count must be at least 1".into());
        }
        if (self.statement_count as usize) < self.fault_count + COMPANIONS + 1 {
            return fail(format!(
                "{} statements leave too few non-faulty statements for {} faults",
                self.statement_count, self.fault_count
            ));
        }
        if self.min_trace_len < SIGNATURE_LEN {
            return fail(format!(
                "min_trace_len {} is shorter than the {SIGNATURE_LEN}-statement fault signature",
                self.min_trace_len
            ));
        }
        if self.min_trace_len > self.max_trace_len {
            return fail("min_trace_len exceeds max_trace_len".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub run: CoverageRun,
    pub ground_truth_cc: BTreeSet<String>,
    pub params: SimParams,
}

#[derive(Clone, Copy, PartialEq)]
enum Role {
    Failing,
    Cc,
    Clean,
}

struct Program {
    faults: Vec<StatementId>,
    companions: Vec<[StatementId; COMPANIONS]>,
    /// Non-faulty statements, ascending.
    pool: Vec<StatementId>,
}

impl Program {
    fn background(&self, len: usize, rng: &mut ChaCha8Rng) -> Vec<StatementId> {
        let mut out = Vec::with_capacity(len);
        let mut pos = rng.gen_range(0..self.pool.len());
        for _ in 0..len {
            out.push(self.pool[pos]);
            pos = if rng.gen_bool(STEP_PROB) {
                (pos + 1) % self.pool.len()
            } else {
                rng.gen_range(0..self.pool.len())
            };
        }
        out
    }

    /// The fault's loop body `c1, c2, fault, c3, c4`, run for a random
    /// number of iterations. With `strength < 1` each iteration after the
    /// second is kept only with probability `strength`.
    fn signature(&self, fault: usize, strength: f64, rng: &mut ChaCha8Rng) -> Vec<StatementId> {
        let f = self.faults[fault];
        let comps = self.companions[fault];
        let reps = rng.gen_range(MIN_REPS..=SIGNATURE_REPS);
        let mut seg = Vec::with_capacity(SIGNATURE_LEN);
        for rep in 0..reps {
            if rep >= MIN_REPS && strength < 1.0 && !rng.gen_bool(strength) {
                continue;
            }
            seg.extend_from_slice(&comps[..COMPANIONS / 2]);
            seg.push(f);
            seg.extend_from_slice(&comps[COMPANIONS / 2..]);
        }
        seg
    }

    fn trace(&self, role: Role, len: usize, strength: f64, rng: &mut ChaCha8Rng) -> Vec<StatementId> {
        let sig = match role {
            Role::Clean => return self.background(len, rng),
            Role::Failing => self.signature(rng.gen_range(0..self.faults.len()), 1.0, rng),
            Role::Cc => self.signature(rng.gen_range(0..self.faults.len()), strength, rng),
        };
        let mut t = self.background(len - sig.len(), rng);
        let at = rng.gen_range(0..=t.len());
        t.splice(at..at, sig);
        t
    }
}

pub fn simulate(params: &SimParams) -> Result<Simulation, SimError> {
    params.validate()?;
    let mut rng = rng::stream(params.seed, 0);

    let mut all: Vec<StatementId> = (1..=params.statement_count).map(StatementId).collect();
    all.shuffle(&mut rng);
    let mut faults: Vec<StatementId> = all[..params.fault_count].to_vec();
    faults.sort_unstable();
    let mut pool: Vec<StatementId> = all[params.fault_count..].to_vec();
    pool.sort_unstable();
    let companions = faults
        .iter()
        .map(|_| {
            let pick: Vec<&StatementId> = pool.choose_multiple(&mut rng, COMPANIONS).collect();
            core::array::from_fn(|i| *pick[i])
        })
        .collect();
    let program = Program {
        faults,
        companions,
        pool,
    };

    let n_cc = params.cc_count();
    let mut roles = Vec::with_capacity(params.n_passing + params.n_failing);
    roles.extend(core::iter::repeat_n(Role::Failing, params.n_failing));
    roles.extend(core::iter::repeat_n(Role::Cc, n_cc));
    roles.extend(core::iter::repeat_n(Role::Clean, params.n_passing - n_cc));
    roles.shuffle(&mut rng);

    let width = format!("{}", roles.len()).len();
    let mut tests = Vec::with_capacity(roles.len());
    let mut truth = BTreeSet::new();
    for (i, role) in roles.iter().enumerate() {
        let id = format!("T{:0width$}", i + 1);
        let len = rng.gen_range(params.min_trace_len..=params.max_trace_len);
        let seq = program.trace(*role, len, params.signature_strength, &mut rng);
        let verdict = match role {
            Role::Failing => Verdict::Failing,
            Role::Cc | Role::Clean => Verdict::Passing,
        };
        if *role == Role::Cc {
            truth.insert(id.clone());
        }
        tests.push(TestCase::new(id, verdict, seq));
    }

    let instrumentation = (1..=params.statement_count)
        .map(|i| {
            (
                StatementId(i),
                Location {
                    file: "Sim.java".into(),
                    line: i,
                },
            )
        })
        .collect();
    let run = CoverageRun::new(
        format!("sim-{}", params.seed),
        params.statement_count,
        tests,
        instrumentation,
        program.faults.iter().copied().collect(),
    )
    .expect("simulated runs satisfy run invariants");

    Ok(Simulation {
        run,
        ground_truth_cc: truth,
        params: params.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

/// Precision, recall and F1 of `report.ct` against `truth`.
///
/// An empty CT has precision 1; an empty truth has recall 1.
pub fn score(report: &DetectionReport, truth: &BTreeSet<String>) -> Result<DetectionScore, SimError> {
    if let Some(id) = truth.iter().find(|id| !report.per_test.contains_key(*id)) {
        return Err(SimError::RunMismatch(format!(
            "ground-truth test `{id}` was not labeled in the report"
        )));
    }
    let tp = report.ct.intersection(truth).count();
    let fp = report.ct.len() - tp;
    let fn_ = truth.len() - tp;
    let precision = if report.ct.is_empty() {
        1.0
    } else {
        tp as f64 / report.ct.len() as f64
    };
    let recall = if truth.is_empty() {
        1.0
    } else {
        tp as f64 / truth.len() as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(DetectionScore {
        precision,
        recall,
        f1,
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
    })
}
