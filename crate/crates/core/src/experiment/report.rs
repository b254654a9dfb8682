use super::{ExperimentError, Op};
use serde::Serialize;
use serde_json::Value;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

/// A CSV artifact.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.to_string(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

/// A two-column plot data file.
#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub columns: [String; 2],
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: &str, x: &str, y: &str, points: Vec<(f64, f64)>) -> Self {
        Series { name: name.to_string(), columns: [x.to_string(), y.to_string()], points }
    }
}

/// Everything a runner produced.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub metrics: BTreeMap<String, Value>,
    pub tables: Vec<Table>,
    pub series: Vec<Series>,
    pub documents: Vec<(String, Value)>,
}

impl Outcome {
    pub fn metric(&mut self, name: impl Into<String>, v: impl Into<Value>) {
        self.metrics.insert(name.into(), v.into());
    }

    pub fn metric_names(&self) -> Vec<String> {
        self.metrics.keys().cloned().collect()
    }

    pub fn f64(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).and_then(Value::as_f64)
    }

    pub fn bool(&self, name: &str) -> Option<bool> {
        self.metrics.get(name).and_then(Value::as_bool)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AssertionResult {
    pub metric: String,
    pub op: Op,
    pub value: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    pub actual: Value,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub config: Value,
    pub metrics: BTreeMap<String, Value>,
    pub assertions: Vec<AssertionResult>,
    pub passed: bool,
    pub runtime_seconds: f64,
    pub version: String,
}

impl Report {
    pub fn failed_assertions(&self) -> impl Iterator<Item = &AssertionResult> {
        self.assertions.iter().filter(|a| !a.passed)
    }
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> ExperimentError + '_ {
    move |err| ExperimentError::Io { path: path.to_path_buf(), err }
}

/// Writes report.json, `<table>.csv`, `<series>.dat` and `<document>.json` into `dir`.
pub fn write_all(dir: &Path, report: &Report, out: &Outcome) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let p = dir.join("report.json");
    std::fs::write(&p, serde_json::to_string_pretty(report).expect("report serializes") + "\n").map_err(io(&p))?;
    for t in &out.tables {
        let p = dir.join(format!("{}.csv", t.name));
        let mut w = csv::Writer::from_path(&p).map_err(|e| ExperimentError::Io { path: p.clone(), err: e.into() })?;
        let csv_err = |e: csv::Error| ExperimentError::Io { path: p.clone(), err: e.into() };
        w.write_record(&t.header).map_err(csv_err)?;
        for r in &t.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush().map_err(io(&p))?;
    }
    for s in &out.series {
        let p = dir.join(format!("{}.dat", s.name));
        let mut f = std::io::BufWriter::new(std::fs::File::create(&p).map_err(io(&p))?);
        writeln!(f, "# {} {}", s.columns[0], s.columns[1]).map_err(io(&p))?;
        for (x, y) in &s.points {
            writeln!(f, "{x:.17e} {y:.17e}").map_err(io(&p))?;
        }
        f.flush().map_err(io(&p))?;
    }
    for (name, doc) in &out.documents {
        let p = dir.join(format!("{name}.json"));
        std::fs::write(&p, serde_json::to_string_pretty(doc).expect("document serializes") + "\n").map_err(io(&p))?;
    }
    Ok(())
}

pub(crate) fn fmt(x: f64) -> String {
    format!("{x:.17e}")
}
