//! JSON and CSV artifacts written by the command line.
//!
//! JSON objects go through `serde_json::Value`, whose map keeps keys sorted,
//! so equal inputs give byte-equal files.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use ccdetect_core::{Combo, CostReport, DetectionReport, FeatureMatrix, ForestModel, PcaModel, Strategy};
use serde::Serialize;

use crate::config::Config;

pub const TOOL: &str = "ccdetect";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Header shared by every report: who wrote it, with what, from what.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: Config,
    pub inputs: BTreeMap<String, InputDigest>,
}

impl Provenance {
    pub fn new(config: &Config, inputs: BTreeMap<String, InputDigest>) -> Self {
        Provenance {
            tool: TOOL,
            version: VERSION,
            config: config.clone(),
            inputs,
        }
    }
}

#[derive(Serialize)]
struct DetectionDocument<'a> {
    #[serde(flatten)]
    provenance: &'a Provenance,
    program_id: &'a str,
    #[serde(flatten)]
    report: &'a DetectionReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComboEvaluation {
    pub combo: Combo,
    pub detection: DetectionReport,
    pub costs: Vec<CostReport>,
}

#[derive(Serialize)]
struct EvaluationDocument<'a> {
    #[serde(flatten)]
    provenance: &'a Provenance,
    program_id: &'a str,
    evaluations: &'a [ComboEvaluation],
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("report types serialize");
    let mut s = serde_json::to_string_pretty(&v).expect("values serialize");
    s.push('\n');
    s
}

pub fn detection_json(prov: &Provenance, program_id: &str, report: &DetectionReport) -> String {
    to_json(&DetectionDocument {
        provenance: prov,
        program_id,
        report,
    })
}

pub fn evaluation_json(prov: &Provenance, program_id: &str, evaluations: &[ComboEvaluation]) -> String {
    to_json(&EvaluationDocument {
        provenance: prov,
        program_id,
        evaluations,
    })
}

#[derive(Serialize)]
struct ForestDump<'a> {
    combo: Combo,
    columns: Vec<String>,
    pca: Option<&'a PcaModel>,
    forest: &'a ForestModel,
}

pub fn forest_json(matrix: &FeatureMatrix, forest: &ForestModel) -> String {
    to_json(&ForestDump {
        combo: matrix.combo(),
        columns: matrix.columns().iter().map(ToString::to_string).collect(),
        pca: matrix.pca(),
        forest,
    })
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 fields")
}

/// Raw combo counts, one row per test, one column per combo key.
pub fn features_csv(matrix: &FeatureMatrix) -> String {
    let mut w = csv_writer();
    let mut header = vec![String::from("test_id")];
    header.extend(matrix.columns().iter().map(|k| k.to_string()));
    w.write_record(&header).expect("in-memory writer");
    for (id, row) in matrix.test_ids().iter().zip(matrix.rows()) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).expect("in-memory writer");
    }
    csv_string(w)
}

/// One program and strategy across the three combos.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub program: String,
    pub strategy: Strategy,
    /// Distinct one-at-a-time costs per combo; `None` when not computed.
    pub one_at_a_time: [Option<Vec<f64>>; 3],
    pub all_at_once: [Option<f64>; 3],
    pub original: f64,
}

impl TableRow {
    pub fn from_evaluations(program: &str, strategy: Strategy, evaluations: &[ComboEvaluation]) -> Option<Self> {
        let mut row = TableRow {
            program: program.into(),
            strategy,
            one_at_a_time: [None, None, None],
            all_at_once: [None, None, None],
            original: f64::NAN,
        };
        for e in evaluations {
            let c = e.costs.iter().find(|c| c.strategy == strategy)?;
            let i = e.combo.k() - 1;
            row.one_at_a_time[i] = c.one_at_a_time.clone();
            row.all_at_once[i] = c.all_at_once;
            row.original = c.original_cost;
        }
        (!row.original.is_nan()).then_some(row)
    }
}

fn cost_cell(v: f64) -> String {
    format!("{v:.3}")
}

fn set_cell(values: &[f64], original: f64) -> String {
    if values.is_empty() {
        return cost_cell(original);
    }
    let mut cells: Vec<String> = values.iter().map(|v| cost_cell(*v)).collect();
    cells.dedup();
    let mut s = String::from("{");
    for (i, c) in cells.iter().enumerate() {
        if i > 0 {
            s.push_str(", ");
        }
        let _ = write!(s, "{c}");
    }
    s.push('}');
    s
}

pub const TABLE_HEADER: [&str; 9] = [
    "program",
    "strategy",
    "one_at_a_time_combo1",
    "one_at_a_time_combo2",
    "one_at_a_time_combo3",
    "all_at_once_combo1",
    "all_at_once_combo2",
    "all_at_once_combo3",
    "original",
];

/// Cost table: one row per program and strategy, costs to three decimals.
/// A one-at-a-time cell lists the distinct costs; with nothing to change it
/// holds the original cost.
pub fn cost_table_csv(rows: &[TableRow]) -> String {
    let mut w = csv_writer();
    w.write_record(TABLE_HEADER).expect("in-memory writer");
    for r in rows {
        let strategy = match r.strategy {
            Strategy::None => "none",
            Strategy::Flip => "flip",
            Strategy::Trim => "trim",
        };
        let mut rec = vec![r.program.clone(), strategy.to_string()];
        rec.extend(
            r.one_at_a_time
                .iter()
                .map(|c| c.as_deref().map_or(String::new(), |v| set_cell(v, r.original))),
        );
        rec.extend(r.all_at_once.iter().map(|c| c.map_or(String::new(), cost_cell)));
        rec.push(cost_cell(r.original));
        w.write_record(&rec).expect("in-memory writer");
    }
    csv_string(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(one: [Option<Vec<f64>>; 3], all: [Option<f64>; 3]) -> TableRow {
        TableRow {
            program: "p".into(),
            strategy: Strategy::Trim,
            one_at_a_time: one,
            all_at_once: all,
            original: 0.25,
        }
    }

    #[test]
    fn table_cells() {
        let r = row(
            [Some(vec![0.0222, 0.9333]), Some(vec![]), None],
            [Some(0.1), Some(0.25), None],
        );
        let text = cost_table_csv(&[r]);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), TABLE_HEADER.join(","));
        assert_eq!(
            lines.next().unwrap(),
            "p,trim,\"{0.022, 0.933}\",0.250,,0.100,0.250,,0.250"
        );
        assert!(lines.next().is_none());
    }

    #[test]
    fn set_cell_merges_equal_rounded_costs() {
        assert_eq!(set_cell(&[0.1001, 0.1002, 0.5], 0.0), "{0.100, 0.500}");
        assert_eq!(set_cell(&[], 0.125), "0.125");
    }
}
