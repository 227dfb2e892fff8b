//! Run records, auxiliary tables and their CSV/JSON writers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, HarnessResult};

pub const RESULTS_HEADER: [&str; 14] = [
    "N",
    "L",
    "tbl",
    "P",
    "E",
    "target_id",
    "seed",
    "r2_train",
    "r2_test",
    "final_loss",
    "rank_J",
    "knee",
    "kernel_dim",
    "runtime_s",
];

/// One run. Metrics that do not apply (e.g. R² before training) are NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    #[serde(rename = "N")]
    pub n_qubits: usize,
    #[serde(rename = "L")]
    pub fm_layers: usize,
    pub tbl: usize,
    #[serde(rename = "P")]
    pub parameters: usize,
    #[serde(rename = "E")]
    pub budget: usize,
    pub target_id: String,
    pub seed: u64,
    pub r2_train: f64,
    pub r2_test: f64,
    pub final_loss: f64,
    #[serde(rename = "rank_J")]
    pub rank_j: usize,
    pub knee: usize,
    pub kernel_dim: usize,
    pub runtime_s: f64,
}

impl RunRecord {
    fn sort_key(&self) -> (usize, usize, usize, &str, u64) {
        (self.n_qubits, self.fm_layers, self.tbl, &self.target_id, self.seed)
    }

    /// Checks `P`, `E`, `rank_J ≤ min(2E+1, P)`, `knee ≤ rank_J` and the kernel dimension.
    pub fn check(&self) -> HarnessResult<()> {
        let n = self.n_qubits;
        let p = (self.fm_layers + 1) * self.tbl * 3 * n;
        let ceiling = (2 * self.budget + 1).min(self.parameters);
        let ok = self.parameters == p
            && self.budget == n * self.fm_layers
            && self.rank_j <= ceiling
            && self.knee <= self.rank_j
            && self.kernel_dim + self.rank_j == self.parameters;
        if ok {
            Ok(())
        } else {
            Err(HarnessError::Consistency(format!("inconsistent record {self:?}")))
        }
    }
}

pub fn sort_records(records: &mut [RunRecord]) {
    records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> HarnessResult<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(HarnessError::Config(format!("unknown format {other:?} (csv|json)"))),
        }
    }
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

/// Sorts by `(N, L, tbl, target_id, seed)` and writes with the fixed header.
pub fn write_results(records: &[RunRecord], path: &Path, format: OutputFormat) -> HarnessResult<()> {
    let mut sorted = records.to_vec();
    sort_records(&mut sorted);
    match format {
        OutputFormat::Csv => {
            let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
            w.write_record(RESULTS_HEADER).map_err(|e| csv_err(path, e))?;
            for r in &sorted {
                w.serialize(r).map_err(|e| csv_err(path, e))?;
            }
            w.flush().map_err(|e| HarnessError::io(path, e))
        }
        OutputFormat::Json => {
            let rows: Vec<serde_json::Value> = sorted.iter().map(record_json).collect();
            write_json(path, &serde_json::Value::Array(rows))
        }
    }
}

/// Non-finite metrics become `null`, since JSON has no NaN.
fn record_json(r: &RunRecord) -> serde_json::Value {
    serde_json::to_value(r).expect("record serializes")
}

fn write_json(path: &Path, value: &serde_json::Value) -> HarnessResult<()> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| HarnessError::io(path, e.into()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| HarnessError::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> HarnessError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => HarnessError::io(path, io),
        other => HarnessError::Data {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

pub fn read_results_csv(path: &Path) -> HarnessResult<Vec<RunRecord>> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header = r.headers().map_err(|e| csv_err(path, e))?;
    if header.iter().ne(RESULTS_HEADER) {
        return Err(HarnessError::Data {
            path: path.to_path_buf(),
            message: format!("unexpected header {header:?}"),
        });
    }
    r.deserialize().map(|row| row.map_err(|e| csv_err(path, e))).collect()
}

/// A small named table of pre-formatted cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn write(&self, path: &Path, format: OutputFormat) -> HarnessResult<()> {
        match format {
            OutputFormat::Csv => {
                let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
                let mut w = csv::Writer::from_writer(file);
                w.write_record(&self.columns).map_err(|e| csv_err(path, e))?;
                for row in &self.rows {
                    w.write_record(row).map_err(|e| csv_err(path, e))?;
                }
                w.flush().map_err(|e| HarnessError::io(path, e))
            }
            OutputFormat::Json => {
                let rows = self
                    .rows
                    .iter()
                    .map(|row| {
                        serde_json::Value::Object(
                            self.columns
                                .iter()
                                .zip(row)
                                .map(|(c, v)| (c.clone(), json_cell(v)))
                                .collect(),
                        )
                    })
                    .collect();
                write_json(path, &serde_json::Value::Array(rows))
            }
        }
    }
}

fn json_cell(v: &str) -> serde_json::Value {
    if let Ok(i) = v.parse::<i64>() {
        return i.into();
    }
    match v.parse::<f64>() {
        Ok(f) if f.is_finite() => serde_json::Number::from_f64(f).map_or(serde_json::Value::Null, Into::into),
        Ok(_) => serde_json::Value::Null,
        Err(_) => v.into(),
    }
}

/// Shortest round-trip formatting, switching to exponent form for very
/// small or large magnitudes. NaN stays `NaN`; `-0` prints as `0`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v == 0.0 {
        "0".into()
    } else if (1e-5..1e16).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Everything an experiment produces.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentOutput {
    pub records: Vec<RunRecord>,
    /// Written next to the main output as `<stem>_<name>.<ext>`.
    pub tables: Vec<Table>,
    /// When set, this table replaces the record file as the main output.
    pub primary_table: Option<Table>,
}

impl ExperimentOutput {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables
            .iter()
            .chain(self.primary_table.as_ref())
            .find(|t| t.name == name)
    }

    /// Writes the main output at `path` and each table beside it; returns
    /// every path written.
    pub fn write(&self, path: &Path, format: OutputFormat) -> HarnessResult<Vec<PathBuf>> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        }
        for r in &self.records {
            r.check()?;
        }
        match &self.primary_table {
            Some(t) => t.write(path, format)?,
            None => write_results(&self.records, path, format)?,
        }
        let mut written = vec![path.to_path_buf()];
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
        let ext = format.extension();
        for t in &self.tables {
            let p = path.with_file_name(format!("{stem}_{}.{ext}", t.name));
            t.write(&p, format)?;
            written.push(p);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(n: usize, l: usize, tbl: usize, target: &str, seed: u64) -> RunRecord {
        let p = (l + 1) * tbl * 3 * n;
        let e = n * l;
        let rank = (2 * e + 1).min(p);
        RunRecord {
            n_qubits: n,
            fm_layers: l,
            tbl,
            parameters: p,
            budget: e,
            target_id: target.into(),
            seed,
            r2_train: 0.1 + 0.2,
            r2_test: -1.0 / 3.0,
            final_loss: 1.234_567_890_123_456_7e-20,
            rank_j: rank,
            knee: rank,
            kernel_dim: p - rank,
            runtime_s: 0.0,
        }
    }

    #[test]
    fn float_formatting_round_trips() {
        for v in [0.1 + 0.2, -1.0 / 3.0, 1e-300, 5e-324, 1.7e308, 123456.0, -0.0, 1e16, 0.99999] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), if v == 0.0 { 0.0 } else { v }, "{s}");
        }
        assert_eq!(fmt_f64(f64::NAN), "NaN");
        assert_eq!(fmt_f64(0.25), "0.25");
        assert_eq!(fmt_f64(3.0), "3");
    }

    #[test]
    fn checks_catch_inconsistent_records() {
        let good = record(1, 2, 1, "t0", 0);
        good.check().unwrap();
        let mut bad = good.clone();
        bad.parameters += 1;
        assert!(bad.check().is_err());
        let mut bad = good.clone();
        bad.knee = bad.rank_j + 1;
        assert!(bad.check().is_err());
        let mut bad = good;
        bad.rank_j = 6;
        bad.kernel_dim = 3;
        assert!(matches!(bad.check(), Err(HarnessError::Consistency(_))));
    }

    #[test]
    fn sorted_by_coordinates_then_target_then_seed() {
        let mut rs = vec![
            record(2, 1, 1, "t0", 5),
            record(1, 2, 2, "t1", 0),
            record(1, 2, 2, "t0", 9),
            record(1, 2, 1, "t0", 3),
            record(1, 2, 2, "t0", 1),
        ];
        sort_records(&mut rs);
        let keys: Vec<_> = rs.iter().map(|r| (r.n_qubits, r.tbl, r.target_id.clone(), r.seed)).collect();
        assert_eq!(
            keys,
            vec![
                (1, 1, "t0".to_string(), 3),
                (1, 2, "t0".into(), 1),
                (1, 2, "t0".into(), 9),
                (1, 2, "t1".into(), 0),
                (2, 1, "t0".into(), 5)
            ]
        );
    }

    #[test]
    fn json_cells_are_typed() {
        assert_eq!(json_cell("3"), serde_json::json!(3));
        assert_eq!(json_cell("0.5"), serde_json::json!(0.5));
        assert_eq!(json_cell("NaN"), serde_json::Value::Null);
        assert_eq!(json_cell("unreached"), serde_json::json!("unreached"));
    }
}
