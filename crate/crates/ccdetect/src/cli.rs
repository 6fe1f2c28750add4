//! The `ccdetect` command line.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use ccdetect_core::features::FeatureMatrix;
use ccdetect_core::forest::ForestError;
use ccdetect_core::{
    apply_strategy, build_features, detect, simulate, summarize, train_forest, CoverageRun, SimParams, Verdict,
};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{
    ClassWeightChoice, Config, FormulaChoice, PcaModeChoice, StrategyChoice, TieChoice, VariantChoice,
};
use crate::error::{Failure, EXIT_FORMAT, EXIT_OTHER, EXIT_PRECONDITION};
use crate::formats::{self, sha256_hex};
use crate::report::{self, ComboEvaluation, InputDigest, Provenance, TableRow};

pub const DETECTION_FILE: &str = "detection.json";
pub const FEATURES_FILE: &str = "features.csv";
pub const FOREST_FILE: &str = "forest.json";
pub const EVALUATION_FILE: &str = "evaluation.json";
pub const TABLE_FILE: &str = "cost_table.csv";
pub const COVERAGE_FILE: &str = "coverage.csv";
pub const INSTRUMENTATION_FILE: &str = "instrumentation.csv";
pub const FAULTS_FILE: &str = "faults.txt";
pub const TRUTH_FILE: &str = "truth.txt";
pub const SIM_FILE: &str = "sim.json";

#[derive(Parser, Debug)]
#[command(
    name = "ccdetect",
    version,
    about = "Detect coincidentally correct tests and measure their effect on fault localization"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Label passing tests as coincidentally correct or not
    Detect(DetectArgs),
    /// Detect with every combo, then cost flip and trim against the original suite
    Evaluate(EvaluateArgs),
    /// Write a synthetic run with known CC tests
    Simulate(SimulateArgs),
    /// Print test, statement and trace-length counts of a run
    Summary(InputArgs),
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Directory holding coverage.csv, instrumentation.csv and faults.txt
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    coverage: Option<PathBuf>,
    #[arg(long)]
    instrumentation: Option<PathBuf>,
    #[arg(long)]
    faults: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// TOML file with defaults; flags win over it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    combo: Option<u8>,
    #[arg(long)]
    chunk_size: Option<usize>,
    #[arg(long)]
    partitions: Option<usize>,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    max_features: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long, value_enum)]
    class_weight: Option<ClassWeightChoice>,
    /// Train on raw combo counts
    #[arg(long)]
    no_pca: bool,
    #[arg(long, value_enum)]
    pca_mode: Option<PcaModeChoice>,
    #[arg(long)]
    pca_fraction: Option<f64>,
    #[arg(long, value_enum)]
    formula: Option<FormulaChoice>,
    #[arg(long, value_enum)]
    tie: Option<TieChoice>,
    #[arg(long, value_enum)]
    strategy: Option<StrategyChoice>,
    #[arg(long, value_enum)]
    variant: Option<VariantChoice>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DetectArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    config: ConfigArgs,
    /// Also write the raw combo-count matrix
    #[arg(long)]
    dump_features: bool,
    /// Also write a forest trained on the whole run
    #[arg(long)]
    dump_forest: bool,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    statements: Option<u32>,
    #[arg(long)]
    passing: Option<usize>,
    #[arg(long)]
    failing: Option<usize>,
    #[arg(long)]
    cc_rate: Option<f64>,
    #[arg(long)]
    fault_count: Option<usize>,
    #[arg(long)]
    min_trace: Option<usize>,
    #[arg(long)]
    max_trace: Option<usize>,
    #[arg(long)]
    signature_strength: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "sim")]
    out_dir: PathBuf,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<Config, Failure> {
        let mut c = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => {$(if let Some(v) = &self.$f { c.$f = v.clone(); })*};
        }
        set!(
            chunk_size,
            partitions,
            trees,
            class_weight,
            pca_mode,
            pca_fraction,
            formula,
            tie,
            strategy,
            variant,
            seed,
            out_dir
        );
        if self.combo.is_some() {
            c.combo = self.combo;
        }
        if self.max_features.is_some() {
            c.max_features = self.max_features;
        }
        if self.max_depth.is_some() {
            c.max_depth = self.max_depth;
        }
        if self.no_pca {
            c.pca = false;
        }
        c.validate()?;
        Ok(c)
    }
}

struct Inputs {
    coverage: PathBuf,
    instrumentation: PathBuf,
    faults: Option<PathBuf>,
}

impl InputArgs {
    fn resolve(&self) -> Result<Inputs, Failure> {
        let pick = |explicit: &Option<PathBuf>, name: &str| {
            explicit.clone().or_else(|| self.input.as_ref().map(|d| d.join(name)))
        };
        let missing = |what: &str| {
            Failure::new(
                "usage",
                EXIT_FORMAT,
                format!("no {what} file: pass --{what} or --input"),
            )
        };
        Ok(Inputs {
            coverage: pick(&self.coverage, COVERAGE_FILE).ok_or_else(|| missing("coverage"))?,
            instrumentation: pick(&self.instrumentation, INSTRUMENTATION_FILE)
                .ok_or_else(|| missing("instrumentation"))?,
            faults: pick(&self.faults, FAULTS_FILE),
        })
    }
}

fn warn(kind: &str, message: &str) {
    #[derive(Serialize)]
    struct Warning<'a> {
        warning: &'a str,
        message: &'a str,
    }
    eprintln!(
        "{}",
        serde_json::to_string(&Warning { warning: kind, message }).expect("plain struct")
    );
}

fn digest(role: &str, path: &Path) -> Result<(String, InputDigest), Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::new("io", EXIT_FORMAT, format!("{}: {e}", path.display())))?;
    Ok((
        role.into(),
        InputDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        },
    ))
}

fn load(inputs: &Inputs, faults: Option<&Path>) -> Result<(CoverageRun, BTreeMap<String, InputDigest>), Failure> {
    let run = formats::load_run(&inputs.coverage, &inputs.instrumentation, faults)?;
    let mut digests = BTreeMap::new();
    let (k, v) = digest("coverage", &inputs.coverage)?;
    digests.insert(k, v);
    let (k, v) = digest("instrumentation", &inputs.instrumentation)?;
    digests.insert(k, v);
    if let Some(f) = faults {
        let (k, v) = digest("faults", f)?;
        digests.insert(k, v);
    }
    Ok((run, digests))
}

/// Writes every file under `dir` or none of them: all contents are staged
/// to temporary names first and only renamed once all writes succeeded.
fn commit(dir: &Path, files: &[(&str, String)]) -> Result<(), Failure> {
    let io = |p: &Path, e: std::io::Error| Failure::new("io_output", EXIT_OTHER, format!("{}: {e}", p.display()));
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut staged = Vec::with_capacity(files.len());
    for (name, text) in files {
        let tmp = dir.join(format!(".{name}.tmp"));
        if let Err(e) = fs::write(&tmp, text) {
            for (t, _) in &staged {
                let _ = fs::remove_file(t);
            }
            let _ = fs::remove_file(&tmp);
            return Err(io(&tmp, e));
        }
        staged.push((tmp, dir.join(name)));
    }
    for (tmp, dest) in &staged {
        fs::rename(tmp, dest).map_err(|e| io(dest, e))?;
    }
    Ok(())
}

fn cmd_detect(args: &DetectArgs) -> Result<(), Failure> {
    let config = args.config.resolve()?;
    let inputs = args.input.resolve()?;
    let faults = match &inputs.faults {
        Some(p) if p.exists() => Some(p.as_path()),
        Some(p) => {
            warn(
                "missing_faults",
                &format!("{} not found; faults are only needed by evaluate", p.display()),
            );
            None
        }
        None => {
            warn(
                "missing_faults",
                "no faults file given; faults are only needed by evaluate",
            );
            None
        }
    };
    let (run, digests) = load(&inputs, faults)?;
    let params = config.detection_params(config.detect_combo());
    let detection = detect(&run, &params)?;

    let prov = Provenance::new(&config, digests);
    let mut files = vec![(
        DETECTION_FILE,
        report::detection_json(&prov, run.program_id(), &detection),
    )];
    if args.dump_features {
        files.push((FEATURES_FILE, report::features_csv(&build_features(&run, params.combo))));
    }
    if args.dump_forest {
        let mut matrix = FeatureMatrix::from_tests(run.tests(), params.combo);
        if let Some(pca) = params.pca {
            matrix = matrix.project(pca)?;
        }
        let labels: Vec<Verdict> = run.tests().iter().map(|t| t.verdict).collect();
        let forest_params = ccdetect_core::ForestParams {
            seed: config.seed,
            ..params.forest.clone()
        };
        let forest = train_forest(matrix.rows(), &labels, &forest_params).map_err(forest_failure)?;
        files.push((FOREST_FILE, report::forest_json(&matrix, &forest)));
    }
    commit(&config.out_dir, &files)?;

    let ct: Vec<&str> = detection.ct.iter().map(String::as_str).collect();
    println!("{} CC tests: {}", ct.len(), ct.join(" "));
    Ok(())
}

fn forest_failure(e: ForestError) -> Failure {
    Failure::new("forest", EXIT_OTHER, e)
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), Failure> {
    let config = args.config.resolve()?;
    let inputs = args.input.resolve()?;
    let faults = inputs
        .faults
        .as_deref()
        .ok_or_else(|| Failure::new("no_faults", EXIT_PRECONDITION, "evaluate needs a faults file"))?;
    let (run, digests) = load(&inputs, Some(faults))?;

    let mut evaluations = Vec::new();
    for combo in config.evaluate_combos() {
        let detection = detect(&run, &config.detection_params(combo))?;
        let mut costs = Vec::new();
        for strategy in config.strategies() {
            costs.push(apply_strategy(
                &run,
                &detection.ct,
                strategy,
                config.variant(),
                config.formula(),
                config.tie_policy(),
            )?);
        }
        evaluations.push(ComboEvaluation {
            combo,
            detection,
            costs,
        });
    }
    let rows: Vec<TableRow> = config
        .strategies()
        .into_iter()
        .filter_map(|s| TableRow::from_evaluations(run.program_id(), s, &evaluations))
        .collect();

    let prov = Provenance::new(&config, digests);
    let files = [
        (
            EVALUATION_FILE,
            report::evaluation_json(&prov, run.program_id(), &evaluations),
        ),
        (TABLE_FILE, report::cost_table_csv(&rows)),
    ];
    commit(&config.out_dir, &files)?;
    print!("{}", files[1].1);
    Ok(())
}

#[derive(Serialize)]
struct SimDocument<'a> {
    tool: &'static str,
    version: &'static str,
    program_id: &'a str,
    params: &'a SimParams,
    cc_tests: usize,
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let d = SimParams::default();
    let params = SimParams {
        statement_count: args.statements.unwrap_or(d.statement_count),
        n_passing: args.passing.unwrap_or(d.n_passing),
        n_failing: args.failing.unwrap_or(d.n_failing),
        cc_rate: args.cc_rate.unwrap_or(d.cc_rate),
        fault_count: args.fault_count.unwrap_or(d.fault_count),
        min_trace_len: args.min_trace.unwrap_or(d.min_trace_len),
        max_trace_len: args.max_trace.unwrap_or(d.max_trace_len),
        signature_strength: args.signature_strength.unwrap_or(d.signature_strength),
        seed: args.seed.unwrap_or(d.seed),
    };
    let sim = simulate(&params)?;
    let doc = SimDocument {
        tool: report::TOOL,
        version: report::VERSION,
        program_id: sim.run.program_id(),
        params: &sim.params,
        cc_tests: sim.ground_truth_cc.len(),
    };
    let files = [
        (COVERAGE_FILE, formats::write_coverage(sim.run.tests())),
        (INSTRUMENTATION_FILE, formats::write_instrumentation(&sim.run)),
        (FAULTS_FILE, formats::write_faults(sim.run.faulty_statements())),
        (TRUTH_FILE, formats::write_truth(&sim.ground_truth_cc)),
        (SIM_FILE, report::to_json(&doc)),
    ];
    commit(&args.out_dir, &files)?;
    println!("wrote {} tests to {}", sim.run.tests().len(), args.out_dir.display());
    Ok(())
}

fn cmd_summary(args: &InputArgs) -> Result<(), Failure> {
    let inputs = args.resolve()?;
    let faults = inputs.faults.as_deref().filter(|p| p.exists());
    let (run, _) = load(&inputs, faults)?;
    print!("{}", report::to_json(&summarize(&run)));
    Ok(())
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Detect(a) => cmd_detect(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Summary(a) => cmd_summary(a),
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", Failure::new("usage", EXIT_FORMAT, first).line());
            return EXIT_FORMAT;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("{}", f.line());
            f.exit_code
        }
    }
}
