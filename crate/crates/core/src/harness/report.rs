use serde::Serialize;
use serde_json::Value;
use std::path::{Path, PathBuf};

use super::config::{ExperimentConfig, ExperimentKind};
use crate::error::Result;

/// One pass/fail line of a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// "<=", ">=" or "==" (flags, value 1 for true).
    pub relation: &'static str,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    pub fn le(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            relation: "<=",
            threshold,
            pass: value <= threshold,
        }
    }

    pub fn ge(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            relation: ">=",
            threshold,
            pass: value >= threshold,
        }
    }

    pub fn flag(name: &str, ok: bool) -> Self {
        Self {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            relation: "==",
            threshold: 1.0,
            pass: ok,
        }
    }
}

/// A CSV detail file: header row and numeric rows in fixed column order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn csv_err(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e.to_string())
}

/// Self-describing experiment summary.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub kind: ExperimentKind,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub results: Value,
    pub config: ExperimentConfig,
    pub config_sha256: String,
    /// None when no calibration file was supplied.
    pub calibration_version: Option<String>,
    pub crate_version: String,
    #[serde(skip)]
    pub tables: Vec<Table>,
}

impl Report {
    pub fn new(config: &ExperimentConfig, calibration_version: Option<String>) -> Self {
        Self {
            kind: config.kind,
            pass: true,
            checks: Vec::new(),
            results: Value::Null,
            config: config.clone(),
            config_sha256: config.sha256(),
            calibration_version,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            tables: Vec::new(),
        }
    }

    pub fn check(&mut self, c: Check) {
        if !c.pass {
            log::warn!("check {} failed: {} {} {}", c.name, c.value, c.relation, c.threshold);
        }
        self.pass &= c.pass;
        self.checks.push(c);
    }

    pub fn find(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn summary_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    fn checks_table(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["name", "value", "relation", "threshold", "pass"]).map_err(csv_err)?;
        for c in &self.checks {
            w.write_record([
                c.name.clone(),
                c.value.to_string(),
                c.relation.to_string(),
                c.threshold.to_string(),
                c.pass.to_string(),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Writes `<kind>.summary.json`, `<kind>.checks.csv` and one
    /// `<kind>.<table>.csv` per detail table into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let stem = self.kind.name();
        let mut out = Vec::new();
        let mut put = |name: String, body: String| -> Result<()> {
            let p = dir.join(name);
            std::fs::write(&p, body)?;
            out.push(p);
            Ok(())
        };
        put(format!("{stem}.summary.json"), self.summary_json())?;
        put(format!("{stem}.checks.csv"), self.checks_table()?)?;
        for t in &self.tables {
            put(format!("{stem}.{}.csv", t.name), t.to_csv()?)?;
        }
        Ok(out)
    }
}
