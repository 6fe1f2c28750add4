use std::fs;
use std::path::{Path, PathBuf};

use ccdetect::formats::{load_run, parse_run, write_coverage, write_faults, write_instrumentation, LoadError};
use ccdetect_core::{simulate, summarize, SimParams};
use proptest::prelude::*;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures/example")
        .join(name)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn written_runs_parse_back(seed in any::<u64>(), passing in 1usize..30, failing in 1usize..6, faults in 1usize..4) {
        let p = SimParams {
            statement_count: 40,
            n_passing: passing,
            n_failing: failing,
            fault_count: faults,
            seed,
            ..SimParams::default()
        };
        let run = simulate(&p).unwrap().run;
        let back = parse_run(
            run.program_id(),
            &write_coverage(run.tests()),
            &write_instrumentation(&run),
            Some(&write_faults(run.faulty_statements())),
        )
        .unwrap();
        prop_assert_eq!(back, run);
    }
}

#[test]
fn fixture_loads() {
    let run = load_run(
        &fixture("coverage.csv"),
        &fixture("instrumentation.csv"),
        Some(&fixture("faults.txt")),
    )
    .unwrap();
    let s = summarize(&run);
    assert_eq!((s.passing, s.failing, s.statements), (8, 2, 8));
    assert_eq!(s.program_id, "example");
    assert_eq!(run.faulty_statements().len(), 1);
}

#[test]
fn malformed_record_reports_path_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let cov = dir.path().join("coverage.csv");
    fs::write(&cov, "# header comment\nT1,-1,1;2\n\nT2,0,1;2\n").unwrap();
    let err = load_run(&cov, &fixture("instrumentation.csv"), None).unwrap_err();
    match err {
        LoadError::MalformedRecord { path, line, .. } => {
            assert_eq!(path, cov);
            assert_eq!(line, 4);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn missing_file_is_io() {
    let err = load_run(
        Path::new("/nonexistent/coverage.csv"),
        &fixture("instrumentation.csv"),
        None,
    )
    .unwrap_err();
    assert!(matches!(err, LoadError::Io { .. }));
}

#[test]
fn empty_faults_file_is_rejected_for_a_faulted_run() {
    let dir = tempfile::tempdir().unwrap();
    let faults = dir.path().join("faults.txt");
    fs::write(&faults, "# none\n").unwrap();
    assert!(load_run(&fixture("coverage.csv"), &fixture("instrumentation.csv"), Some(&faults)).is_err());
}
