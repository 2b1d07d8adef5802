//! Run reports and CSV tables.

use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub max_residual: f64,
    pub tolerance: f64,
}

impl Check {
    /// Passes iff `residual <= tolerance`; NaN fails.
    pub fn upper(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        let status = if residual <= tolerance { Status::Pass } else { Status::Fail };
        Check { name: name.into(), status, max_residual: residual, tolerance }
    }

    /// `value > threshold`, reported as the shortfall `max(0, threshold - value)`
    /// against tolerance 0.
    pub fn lower(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        let shortfall = if value > threshold { 0.0 } else if value.is_nan() { f64::NAN } else { threshold - value };
        let status = if value > threshold { Status::Pass } else { Status::Fail };
        Check { name: name.into(), status, max_residual: shortfall, tolerance: 0.0 }
    }

    /// Exact integer or boolean condition.
    pub fn exact(name: impl Into<String>, defect: usize) -> Self {
        Self::upper(name, defect as f64, 0.0)
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

/// Header plus rows of already formatted cells.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> csv::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Output of one command, before the run-level fields are attached.
#[derive(Debug, Default)]
pub struct Section {
    pub checks: Vec<Check>,
    pub details: serde_json::Map<String, Value>,
    pub table: Option<Table>,
}

impl Section {
    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.details.insert(key.to_string(), v);
    }
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub model_fingerprint: String,
    pub seed: u64,
    pub status: Status,
    pub checks: Vec<Check>,
    pub details: Value,
}

impl RunReport {
    pub fn new(command: &str, fingerprint: String, seed: u64, section: Section) -> Self {
        let status = if section.checks.iter().all(Check::passed) { Status::Pass } else { Status::Fail };
        RunReport {
            command: command.to_string(),
            model_fingerprint: fingerprint,
            seed,
            status,
            checks: section.checks,
            details: Value::Object(section.details),
        }
    }
}

/// SHA-256 of the config re-serialized with sorted keys, so formatting and
/// key order do not change the fingerprint.
pub fn fingerprint(config: &Value) -> String {
    let canonical = serde_json::to_string(config).expect("JSON values always serialize");
    Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}
