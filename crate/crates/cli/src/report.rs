//! Report tables, files and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// A CSV table held in memory until the run finishes.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: &str, header: &[&str]) -> Table {
        Table { file: file.to_string(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.into_error()))
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

/// Shortest round-trip text for a float.
pub fn num(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:e}")
    }
}

/// One named pass/fail property of a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Check {
        Check { name: name.into(), value, threshold, passed: value <= threshold, detail: String::new() }
    }

    pub fn at_least(name: &str, value: f64, threshold: f64) -> Check {
        Check { name: name.into(), value, threshold, passed: value >= threshold, detail: String::new() }
    }

    pub fn flag(name: &str, passed: bool, detail: impl Into<String>) -> Check {
        Check { name: name.into(), value: f64::from(u8::from(passed)), threshold: 1.0, passed, detail: detail.into() }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Check {
        self.detail = detail.into();
        self
    }
}

/// Everything an experiment produced.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub tables: Vec<Table>,
    pub documents: Vec<(String, Value)>,
    pub checks: Vec<Check>,
    pub summary: Value,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn table(&self, file: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.file == file)
    }
}

/// Inputs recorded in the manifest.
#[derive(Clone, Debug)]
pub struct RunContext {
    pub experiment: String,
    pub config_bytes: Vec<u8>,
    pub seed: u64,
    pub sampling_seed: u64,
    pub threads: usize,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("partial");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Writes tables, documents, `checks.csv` and `manifest.json` into `dir`.
/// Returns the paths written.
pub fn write_report(dir: &Path, ctx: &RunContext, report: &Report) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut outputs = Vec::new();
    let mut emit = |name: &str, bytes: Vec<u8>| -> Result<(), CliError> {
        let path = dir.join(name);
        write_atomic(&path, &bytes)?;
        outputs.push(json!({ "file": name, "sha256": sha256_hex(&bytes) }));
        written.push(path);
        Ok(())
    };
    for t in &report.tables {
        emit(&t.file, t.to_csv()?)?;
    }
    for (name, doc) in &report.documents {
        let text = serde_json::to_string_pretty(doc).expect("serializable document");
        emit(name, text.into_bytes())?;
    }
    let mut checks = Table::new("checks.csv", &["check", "value", "threshold", "passed", "detail"]);
    for c in &report.checks {
        checks.push(vec![c.name.clone(), num(c.value), num(c.threshold), c.passed.to_string(), c.detail.clone()]);
    }
    emit("checks.csv", checks.to_csv()?)?;

    let manifest = json!({
        "experiment": ctx.experiment,
        "config_sha256": sha256_hex(&ctx.config_bytes),
        "versions": {
            "radon-lab": env!("CARGO_PKG_VERSION"),
            "radon-core": radon_core::VERSION,
        },
        "seeds": { "run": ctx.seed, "sampling": ctx.sampling_seed },
        "threads": ctx.threads,
        "passed": report.passed(),
        "summary": report.summary,
        "outputs": outputs,
    });
    let path = dir.join("manifest.json");
    write_atomic(&path, serde_json::to_string_pretty(&manifest).expect("manifest").as_bytes())?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.0, -1.5, 1e-300, std::f64::consts::PI, 123456.789] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(f64::INFINITY), "inf");
    }

    #[test]
    fn check_thresholds_are_inclusive() {
        assert!(Check::at_most("a", 1.0, 1.0).passed);
        assert!(!Check::at_most("a", 1.0 + 1e-15, 1.0).passed);
        assert!(Check::at_least("b", 0.4, 0.4).passed);
        assert!(!Check::at_least("b", f64::NAN, 0.4).passed);
        assert_eq!(Check::flag("c", false, "").value, 0.0);
    }

    #[test]
    fn csv_quotes_fields() {
        let mut t = Table::new("t.csv", &["a", "b"]);
        t.push(vec!["1".into(), "x,y".into()]);
        assert_eq!(String::from_utf8(t.to_csv().unwrap()).unwrap(), "a,b\n1,\"x,y\"\n");
        assert_eq!(t.column("b"), Some(1));
    }

    #[test]
    fn report_written_with_hashes() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new("t.csv", &["a"]);
        t.push(vec!["1".into()]);
        let report = Report {
            tables: vec![t],
            documents: vec![("d.json".into(), json!({ "k": 1 }))],
            checks: vec![Check::at_most("x", 0.0, 1.0)],
            summary: json!({}),
        };
        let ctx = RunContext { experiment: "demo".into(), config_bytes: b"{}".to_vec(), seed: 1, sampling_seed: 2, threads: 1 };
        let files = write_report(dir.path(), &ctx, &report).unwrap();
        assert_eq!(files.len(), 4);
        let manifest: Value = serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["config_sha256"], sha256_hex(b"{}"));
        let first = &manifest["outputs"][0];
        assert_eq!(first["file"], "t.csv");
        assert_eq!(first["sha256"], sha256_hex(&fs::read(dir.path().join("t.csv")).unwrap()));
        assert!(!dir.path().join("t.partial").exists());
    }
}
