//! Line-oriented input files.
//!
//! Coverage: `test_id,verdict,trace` with verdict `-1` or `+1` and a
//! `;`-separated trace. Instrumentation: a `statements,<count>` header, then
//! `id,file,line`. Faults and truth: one entry per line. Lines starting with
//! `#` are comments everywhere.

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use ccdetect_core::spectra::{Location, SpectraError};
use ccdetect_core::{CoverageRun, StatementId, TestCase, Verdict};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// A record that does not match its grammar. `line` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {reason}")]
pub struct ParseError {
    pub line: u64,
    pub reason: String,
}

impl ParseError {
    fn new(line: u64, reason: impl Into<String>) -> Self {
        ParseError {
            line,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}: malformed record at line {line}: {reason}")]
    MalformedRecord { path: PathBuf, line: u64, reason: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Spectra(#[from] SpectraError),
}

impl LoadError {
    fn at(path: &Path, e: ParseError) -> Self {
        LoadError::MalformedRecord {
            path: path.to_path_buf(),
            line: e.line,
            reason: e.reason,
        }
    }
}

fn split_fields(line: &str) -> Result<csv::StringRecord, csv::Error> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(line.as_bytes());
    let mut rec = csv::StringRecord::new();
    r.read_record(&mut rec)?;
    Ok(rec)
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .has_headers(false)
        .flexible(true)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    let bytes = w.into_inner().expect("in-memory writer");
    String::from_utf8(bytes).expect("csv writer emits the utf-8 it was given")
}

/// One CSV record per non-comment, non-blank line, with its 1-based number.
fn records(text: &str) -> impl Iterator<Item = Result<(u64, csv::StringRecord), ParseError>> + '_ {
    entries(text).map(|(line, l)| {
        split_fields(l)
            .map(|rec| (line, rec))
            .map_err(|e| ParseError::new(line, e.to_string()))
    })
}

fn parse_u32(field: &str, what: &str, line: u64) -> Result<u32, ParseError> {
    if field.is_empty() || !field.bytes().all(|b| b.is_ascii_digit()) {
        return Err(ParseError::new(
            line,
            format!("{what} `{field}` is not a positive integer"),
        ));
    }
    match field.parse::<u32>() {
        Ok(0) => Err(ParseError::new(line, format!("{what} must be at least 1"))),
        Ok(v) => Ok(v),
        Err(_) => Err(ParseError::new(line, format!("{what} `{field}` is out of range"))),
    }
}

/// Plain-text lines with comments and blank lines dropped.
fn entries(text: &str) -> impl Iterator<Item = (u64, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i as u64 + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn parse_coverage(text: &str) -> Result<Vec<TestCase>, ParseError> {
    let mut tests = Vec::new();
    for r in records(text) {
        let (line, rec) = r?;
        if rec.len() != 3 {
            return Err(ParseError::new(
                line,
                format!("expected 3 fields `test_id,verdict,trace`, found {}", rec.len()),
            ));
        }
        let id = &rec[0];
        if id.is_empty() {
            return Err(ParseError::new(line, "empty test id"));
        }
        let verdict = match &rec[1] {
            "-1" => Verdict::Passing,
            "+1" => Verdict::Failing,
            other => return Err(ParseError::new(line, format!("verdict `{other}` is not -1 or +1"))),
        };
        if rec[2].is_empty() {
            return Err(ParseError::new(line, "empty trace"));
        }
        let sequence = rec[2]
            .split(';')
            .map(|s| parse_u32(s, "statement id", line).map(StatementId))
            .collect::<Result<Vec<_>, _>>()?;
        tests.push(TestCase::new(id, verdict, sequence));
    }
    Ok(tests)
}

pub fn write_coverage(tests: &[TestCase]) -> String {
    let mut w = writer();
    for t in tests {
        let trace: Vec<String> = t.trace.sequence.iter().map(|s| s.get().to_string()).collect();
        w.write_record([t.id(), &t.verdict.to_string(), &trace.join(";")])
            .expect("in-memory writer");
    }
    finish(w)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instrumentation {
    pub statement_count: u32,
    pub locations: Vec<(StatementId, Location)>,
}

pub fn parse_instrumentation(text: &str) -> Result<Instrumentation, ParseError> {
    let mut it = records(text);
    let (line, header) = match it.next() {
        Some(r) => r?,
        None => return Err(ParseError::new(1, "missing `statements,<count>` header")),
    };
    if header.len() != 2 || &header[0] != "statements" {
        return Err(ParseError::new(line, "expected header `statements,<count>`"));
    }
    let statement_count = parse_u32(&header[1], "statement count", line)?;
    let mut locations = Vec::new();
    for r in it {
        let (line, rec) = r?;
        if rec.len() != 3 {
            return Err(ParseError::new(
                line,
                format!("expected 3 fields `id,file,line`, found {}", rec.len()),
            ));
        }
        let id = parse_u32(&rec[0], "statement id", line)?;
        if rec[1].is_empty() {
            return Err(ParseError::new(line, "empty source file"));
        }
        let src_line = parse_u32(&rec[2], "source line", line)?;
        locations.push((
            StatementId(id),
            Location {
                file: rec[1].to_string(),
                line: src_line,
            },
        ));
    }
    Ok(Instrumentation {
        statement_count,
        locations,
    })
}

pub fn write_instrumentation(run: &CoverageRun) -> String {
    let mut w = writer();
    w.write_record(["statements", &run.statement_count().to_string()])
        .expect("in-memory writer");
    for (id, loc) in run.instrumentation() {
        w.write_record([id.get().to_string(), loc.file.clone(), loc.line.to_string()])
            .expect("in-memory writer");
    }
    finish(w)
}

pub fn parse_faults(text: &str) -> Result<BTreeSet<StatementId>, ParseError> {
    let mut faults = BTreeSet::new();
    for (line, entry) in entries(text) {
        let id = parse_u32(entry, "statement id", line)?;
        if !faults.insert(StatementId(id)) {
            return Err(ParseError::new(line, format!("statement {id} listed twice")));
        }
    }
    Ok(faults)
}

pub fn write_faults(faults: &BTreeSet<StatementId>) -> String {
    faults.iter().map(|s| format!("{}\n", s.get())).collect()
}

/// Ground-truth CC test ids, one per line.
pub fn parse_truth(text: &str) -> Result<BTreeSet<String>, ParseError> {
    let mut truth = BTreeSet::new();
    for (line, entry) in entries(text) {
        if entry.contains(',') || entry.trim() != entry {
            return Err(ParseError::new(line, format!("`{entry}` is not a bare test id")));
        }
        if !truth.insert(entry.to_string()) {
            return Err(ParseError::new(line, format!("test `{entry}` listed twice")));
        }
    }
    Ok(truth)
}

pub fn write_truth(truth: &BTreeSet<String>) -> String {
    truth.iter().map(|t| format!("{t}\n")).collect()
}

/// Builds a run from file contents. Without `faults` the run is only fit
/// for detection.
pub fn parse_run(
    program_id: &str,
    coverage: &str,
    instrumentation: &str,
    faults: Option<&str>,
) -> Result<CoverageRun, RunParseError> {
    let tests = parse_coverage(coverage).map_err(RunParseError::Coverage)?;
    let instr = parse_instrumentation(instrumentation).map_err(RunParseError::Instrumentation)?;
    let run = match faults {
        Some(text) => {
            let faults = parse_faults(text).map_err(RunParseError::Faults)?;
            CoverageRun::new(program_id, instr.statement_count, tests, instr.locations, faults)?
        }
        None => CoverageRun::without_faults(program_id, instr.statement_count, tests, instr.locations)?,
    };
    Ok(run)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunParseError {
    #[error("coverage: {0}")]
    Coverage(ParseError),
    #[error("instrumentation: {0}")]
    Instrumentation(ParseError),
    #[error("faults: {0}")]
    Faults(ParseError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
}

pub fn read_text(path: &Path) -> Result<String, LoadError> {
    fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Program id for a run loaded from disk: the name of the directory holding
/// the coverage file, else the file stem.
pub fn program_id_for(coverage: &Path) -> String {
    let dir = coverage.canonicalize().ok().and_then(|p| {
        p.parent()
            .and_then(|d| d.file_name())
            .map(|n| n.to_string_lossy().into_owned())
    });
    dir.or_else(|| coverage.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "program".into())
}

pub fn load_run(coverage: &Path, instrumentation: &Path, faults: Option<&Path>) -> Result<CoverageRun, LoadError> {
    let cov = read_text(coverage)?;
    let instr = read_text(instrumentation)?;
    let flt = faults.map(read_text).transpose()?;
    parse_run(&program_id_for(coverage), &cov, &instr, flt.as_deref()).map_err(|e| match e {
        RunParseError::Coverage(p) => LoadError::at(coverage, p),
        RunParseError::Instrumentation(p) => LoadError::at(instrumentation, p),
        RunParseError::Faults(p) => LoadError::at(faults.expect("faults were parsed"), p),
        RunParseError::Spectra(s) => LoadError::Spectra(s),
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
