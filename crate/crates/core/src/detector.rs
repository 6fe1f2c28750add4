//! Ensemble detection of coincidentally correct tests.
//!
//! The passing tests are processed one chunk at a time. For every chunk the
//! remaining passing tests are split at random into `p` near-equal
//! partitions, each partition is merged with *all* failing tests, and one
//! random forest is trained per merged set. Every forest labels every chunk
//! test, and a chunk test joins CT when at least half of the `p` labels say
//! `Failing` (`cc_num >= ncc_num`, so a tie counts as CC).
//!
//! Features (and the optional PCA) are fitted on each training set alone and
//! then applied to the chunk.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{Combo, FeatureError, FeatureMatrix, PcaSettings};
use crate::forest::{default_max_features, train_forest, ForestError, ForestParams};
use crate::rng::{self, Fnv};
use crate::spectra::{CoverageRun, TestCase, Verdict};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectionError {
    #[error("run has no failing tests")]
    NoFailingTests,
    #[error("{passing} passing tests cannot leave two training partitions beside a chunk of {chunk}")]
    InsufficientPassing { passing: usize, chunk: usize },
    #[error("chunks do not partition the passing tests: {0}")]
    ChunksNotPartition(String),
    #[error("invalid detection parameter: {0}")]
    InvalidParams(&'static str),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Forest(#[from] ForestError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionParams {
    /// Passing tests labeled per round (K).
    pub chunk_size: usize,
    /// Training partitions, and thus forests, per round (p).
    pub partitions: usize,
    pub combo: Combo,
    /// `None` disables PCA.
    pub pca: Option<PcaSettings>,
    /// Forest settings; `seed` is replaced by a per-forest derived seed.
    pub forest: ForestParams,
    pub seed: u64,
}

impl Default for DetectionParams {
    fn default() -> Self {
        DetectionParams {
            chunk_size: 10,
            partitions: 3,
            combo: Combo::One,
            pca: Some(PcaSettings::default()),
            forest: ForestParams::default(),
            seed: 0,
        }
    }
}

/// Partition-level labels for one passing test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestVotes {
    pub labels: Vec<Verdict>,
    /// Labels saying `Failing`.
    pub cc_num: usize,
    /// Labels saying `Passing`.
    pub ncc_num: usize,
}

impl TestVotes {
    pub fn tally(labels: Vec<Verdict>) -> Self {
        let cc_num = labels.iter().filter(|l| l.is_failing()).count();
        let ncc_num = labels.len() - cc_num;
        TestVotes {
            labels,
            cc_num,
            ncc_num,
        }
    }

    /// Majority vote with ties resolved towards CC.
    pub fn is_cc(&self) -> bool {
        self.cc_num >= self.ncc_num
    }
}

/// One chunk round: the labeled chunk and the training manifests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkRound {
    pub tests: Vec<String>,
    /// Partition count actually used; below the requested `p` only when too
    /// few passing tests remain outside the chunk.
    pub partitions: usize,
    /// Test ids of `partition_m ∪ FT`, one list per forest.
    pub training_sets: Vec<Vec<String>>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub params: DetectionParams,
    pub run_digest: u64,
    pub chunks: Vec<ChunkRound>,
    pub per_test: BTreeMap<String, TestVotes>,
    pub ct: BTreeSet<String>,
}

/// Seeded chunking of the passing tests followed by the ensemble rounds.
pub fn detect(run: &CoverageRun, params: &DetectionParams) -> Result<DetectionReport, DetectionError> {
    check_params(params)?;
    let mut order: Vec<&str> = run.passing().map(TestCase::id).collect();
    order.shuffle(&mut rng::stream(params.seed, u64::MAX));
    let chunks: Vec<Vec<String>> = order
        .chunks(params.chunk_size)
        .map(|c| c.iter().map(|s| String::from(*s)).collect())
        .collect();
    detect_fixed_chunks(run, &chunks, params)
}

/// Runs the ensemble rounds over an explicit chunking of the passing tests.
///
/// Each round's randomness is keyed on the chunk's members rather than its
/// position, so reordering the chunks leaves CT unchanged.
pub fn detect_fixed_chunks(
    run: &CoverageRun,
    chunks: &[Vec<String>],
    params: &DetectionParams,
) -> Result<DetectionReport, DetectionError> {
    check_params(params)?;
    let failing: Vec<&TestCase> = run.failing().collect();
    if failing.is_empty() {
        return Err(DetectionError::NoFailingTests);
    }
    let passing: Vec<&TestCase> = run.passing().collect();
    check_partition(&passing, chunks)?;

    let mut rounds = Vec::with_capacity(chunks.len());
    let mut per_test = BTreeMap::new();
    for chunk in chunks {
        let (round, labels) = run_round(&passing, &failing, chunk, params)?;
        for (id, l) in chunk.iter().zip(labels) {
            per_test.insert(id.clone(), TestVotes::tally(l));
        }
        rounds.push(round);
    }

    let ct = per_test
        .iter()
        .filter(|(_, v)| v.is_cc())
        .map(|(k, _)| k.clone())
        .collect();
    Ok(DetectionReport {
        params: params.clone(),
        run_digest: run.digest(),
        chunks: rounds,
        per_test,
        ct,
    })
}

fn check_params(params: &DetectionParams) -> Result<(), DetectionError> {
    if params.chunk_size == 0 {
        return Err(DetectionError::InvalidParams("chunk_size must be positive"));
    }
    if params.partitions < 2 {
        return Err(DetectionError::InvalidParams("partitions must be at least 2"));
    }
    Ok(())
}

fn check_partition(passing: &[&TestCase], chunks: &[Vec<String>]) -> Result<(), DetectionError> {
    let pt: BTreeSet<&str> = passing.iter().map(|t| t.id()).collect();
    let mut seen = BTreeSet::new();
    for chunk in chunks {
        if chunk.is_empty() {
            return Err(DetectionError::ChunksNotPartition("empty chunk".into()));
        }
        for id in chunk {
            if !pt.contains(id.as_str()) {
                return Err(DetectionError::ChunksNotPartition(alloc::format!(
                    "`{id}` is not a passing test"
                )));
            }
            if !seen.insert(id.as_str()) {
                return Err(DetectionError::ChunksNotPartition(alloc::format!(
                    "`{id}` appears in more than one chunk"
                )));
            }
        }
    }
    if let Some(missing) = pt.iter().find(|id| !seen.contains(*id)) {
        return Err(DetectionError::ChunksNotPartition(alloc::format!(
            "`{missing}` is not in any chunk"
        )));
    }
    for chunk in chunks {
        if passing.len() - chunk.len() < 2 {
            return Err(DetectionError::InsufficientPassing {
                passing: passing.len(),
                chunk: chunk.len(),
            });
        }
    }
    Ok(())
}

fn chunk_seed(seed: u64, chunk: &[String]) -> u64 {
    let mut ids: Vec<&str> = chunk.iter().map(String::as_str).collect();
    ids.sort_unstable();
    let mut h = Fnv::new();
    for id in ids {
        h.write_str(id);
    }
    rng::derive(seed, h.finish())
}

/// Splits `items` into `parts` runs whose sizes differ by at most one.
fn split_even<T: Copy>(items: &[T], parts: usize) -> Vec<Vec<T>> {
    let base = items.len() / parts;
    let extra = items.len() % parts;
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for m in 0..parts {
        let len = base + usize::from(m < extra);
        out.push(items[start..start + len].to_vec());
        start += len;
    }
    out
}

type Labels = Vec<Vec<Verdict>>;

fn run_round(
    passing: &[&TestCase],
    failing: &[&TestCase],
    chunk: &[String],
    params: &DetectionParams,
) -> Result<(ChunkRound, Labels), DetectionError> {
    let seed = chunk_seed(params.seed, chunk);
    let in_chunk: BTreeSet<&str> = chunk.iter().map(String::as_str).collect();
    let chunk_tests: Vec<&TestCase> = chunk
        .iter()
        .map(|id| *passing.iter().find(|t| t.id() == id).expect("validated chunk"))
        .collect();

    let mut rest: Vec<usize> = (0..passing.len())
        .filter(|&i| !in_chunk.contains(passing[i].id()))
        .collect();
    rest.shuffle(&mut rng::stream(seed, 0));
    let p = params.partitions.min(rest.len());

    let mut training_sets = Vec::with_capacity(p);
    let mut labels: Labels = vec![Vec::with_capacity(p); chunk.len()];
    for (m, mut part) in split_even(&rest, p).into_iter().enumerate() {
        part.sort_unstable();
        let train: Vec<&TestCase> = part
            .iter()
            .map(|&i| passing[i])
            .chain(failing.iter().copied())
            .collect();
        let forest_seed = rng::derive(seed, m as u64 + 1);
        let predicted = label_chunk(&train, &chunk_tests, params, forest_seed)?;
        for (slot, v) in labels.iter_mut().zip(predicted) {
            slot.push(v);
        }
        training_sets.push(train.iter().map(|t| String::from(t.id())).collect());
    }

    Ok((
        ChunkRound {
            tests: chunk.to_vec(),
            partitions: p,
            training_sets,
            seed,
        },
        labels,
    ))
}

/// Trains one forest on `train` and labels each test of `chunk`.
fn label_chunk(
    train: &[&TestCase],
    chunk: &[&TestCase],
    params: &DetectionParams,
    seed: u64,
) -> Result<Vec<Verdict>, DetectionError> {
    let mut matrix = FeatureMatrix::from_tests(train.iter().copied(), params.combo);
    // No combo observed at all (e.g. combo3 over traces shorter than 3):
    // every row is the same, so a single constant column stands in.
    let empty = matrix.columns().is_empty();
    if !empty {
        if let Some(pca) = params.pca {
            matrix = matrix.project(pca)?;
        }
    }
    let featurize = |t: &TestCase| {
        if empty {
            vec![0.0]
        } else {
            matrix.featurize(&t.trace.sequence)
        }
    };
    let x: Vec<Vec<f64>> = if empty {
        vec![vec![0.0]; train.len()]
    } else {
        matrix.rows().to_vec()
    };
    let y: Vec<Verdict> = train.iter().map(|t| t.verdict).collect();

    let d = x[0].len();
    let forest_params = ForestParams {
        seed,
        max_features: Some(
            params
                .forest
                .max_features
                .unwrap_or_else(|| default_max_features(d))
                .min(d),
        ),
        ..params.forest.clone()
    };
    let model = train_forest(&x, &y, &forest_params)?;
    chunk.iter().map(|t| Ok(model.predict(&featurize(t))?)).collect()
}
