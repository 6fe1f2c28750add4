//! Detection of coincidentally correct test cases.
//!
//! A coincidentally correct (CC) test passes even though it executes a faulty
//! statement. Such tests blur coverage-based fault localization. This crate
//! holds the algorithmic core:
//!
//! - [`spectra`]: coverage runs, traces and verdicts.
//! - [`features`]: combo-k count vectors and PCA projection.
//! - [`forest`]: a seeded random forest (bagged CART trees, Gini splits).
//! - [`detector`]: the chunk/partition ensemble that votes CC membership.
//! - [`localization`]: suspiciousness ranking, localization cost and the
//!   flip/trim strategies.
//! - [`simulator`]: synthetic coverage runs with known CC tests.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, reports and the
//! command line live in the `ccdetect` crate.
#![no_std]
#![deny(rust_2018_idioms)]

extern crate alloc;

pub mod detector;
pub mod features;
pub mod forest;
pub mod localization;
mod rng;
pub mod simulator;
pub mod spectra;

pub use detector::{detect, detect_fixed_chunks, DetectionError, DetectionParams, DetectionReport};
pub use features::{build_features, fit_pca, Combo, ComboKey, FeatureMatrix, PcaMode, PcaModel};
pub use forest::{train_forest, ForestModel, ForestParams, TreeNode};
pub use localization::{
    apply_strategy, cost, suspiciousness, CostReport, Formula, SpectraCounts, Strategy, TiePolicy, Variant,
};
pub use simulator::{score, simulate, DetectionScore, SimParams, Simulation};
pub use spectra::{summarize, CoverageRun, ExecutionTrace, RunSummary, StatementId, TestCase, Verdict};
