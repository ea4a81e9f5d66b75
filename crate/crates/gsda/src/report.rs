//! Evaluation reports. The hashed payload leaves out wall-clock fields so
//! reruns with the same seeds hash identically.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRow {
    pub id: usize,
    pub true_label: usize,
    pub target_label: Option<usize>,
    pub predicted_label: usize,
    pub success: bool,
    pub d_norm: f64,
    pub d_c: f64,
    pub d_h: f64,
    pub e_delta: f64,
    pub beta_used: f64,
    pub iterations: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub instances: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_d_norm: f64,
    pub mean_d_c: f64,
    pub mean_d_h: f64,
    pub mean_e_delta: f64,
    /// Means over successful rows only; `None` without successes.
    pub success_mean_d_norm: Option<f64>,
    pub success_mean_d_c: Option<f64>,
    pub success_mean_d_h: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl Aggregates {
    pub fn from_rows(rows: &[InstanceRow]) -> Self {
        let successes = rows.iter().filter(|r| r.success).count();
        let all = |f: fn(&InstanceRow) -> f64| mean(rows.iter().map(f)).unwrap_or(0.0);
        let ok = |f: fn(&InstanceRow) -> f64| mean(rows.iter().filter(|r| r.success).map(f));
        Self {
            instances: rows.len(),
            successes,
            success_rate: if rows.is_empty() { 0.0 } else { successes as f64 / rows.len() as f64 },
            mean_d_norm: all(|r| r.d_norm),
            mean_d_c: all(|r| r.d_c),
            mean_d_h: all(|r| r.d_h),
            mean_e_delta: all(|r| r.e_delta),
            success_mean_d_norm: ok(|r| r.d_norm),
            success_mean_d_c: ok(|r| r.d_c),
            success_mean_d_h: ok(|r| r.d_h),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub command: String,
    /// Fully resolved configuration of the run.
    pub config: serde_json::Value,
    pub rows: Vec<InstanceRow>,
    pub aggregates: Aggregates,
    pub created_unix_ms: u64,
    /// SHA-256 of [`EvalReport::payload`].
    pub payload_sha256: String,
}

pub(crate) fn unix_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl EvalReport {
    pub fn new(command: &str, config: serde_json::Value, rows: Vec<InstanceRow>) -> Self {
        let aggregates = Aggregates::from_rows(&rows);
        let mut report = Self {
            command: command.to_string(),
            config,
            rows,
            aggregates,
            created_unix_ms: unix_ms(),
            payload_sha256: String::new(),
        };
        report.payload_sha256 = report.payload_hash();
        report
    }

    /// Report content without timing fields, serialized compactly.
    pub fn payload(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        let obj = v.as_object_mut().expect("object");
        obj.remove("created_unix_ms");
        obj.remove("payload_sha256");
        if let Some(rows) = obj.get_mut("rows").and_then(|r| r.as_array_mut()) {
            for row in rows {
                row.as_object_mut().expect("row object").remove("wall_ms");
            }
        }
        v.to_string()
    }

    pub fn payload_hash(&self) -> String {
        let digest = Sha256::digest(self.payload().as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    /// True when the stored aggregates match a recomputation from rows.
    pub fn aggregates_consistent(&self) -> bool {
        Aggregates::from_rows(&self.rows) == self.aggregates
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,true_label,target_label,predicted_label,success,d_norm,d_c,d_h,e_delta,beta_used,iterations,wall_ms\n");
        for r in &self.rows {
            let target = r.target_label.map(|t| t.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:e},{:e},{:e},{:e},{:e},{},{:.3}",
                r.id, r.true_label, target, r.predicted_label, r.success, r.d_norm, r.d_c, r.d_h, r.e_delta, r.beta_used, r.iterations, r.wall_ms
            );
        }
        out
    }

    pub fn write(&self, path: &Path, format: ReportFormat) -> Result<()> {
        match format {
            ReportFormat::Json => crate::io::write_json(self, path),
            ReportFormat::Csv => fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e)),
        }
    }
}
