//! Result emission: a fixed-schema results.csv and a summary.json validated
//! against the schema shipped in docs/summary.schema.json.

use crate::error::{Error, Result};
use serde::Serialize;
use std::io::Write;
use std::path::Path;

/// One row of results.csv. Optional cells are left empty.
#[derive(Debug, Clone, Serialize, Default)]
pub struct ResultRow {
    pub kind: String,
    pub model: String,
    pub dim: String,
    pub q: String,
    pub t: String,
    pub x0: String,
    pub component: String,
    pub value: String,
    pub stderr: String,
    pub oracle: String,
    pub rel_err: String,
    pub extra: String,
    pub verdict: String,
}

impl ResultRow {
    pub fn num(v: f64) -> String {
        format!("{v:.17e}")
    }
}

pub const CSV_HEADER: [&str; 13] = [
    "kind", "model", "dim", "q", "t", "x0", "component", "value", "stderr", "oracle", "rel_err",
    "extra", "verdict",
];

/// Write rows with RFC-4180 quoting.
pub fn write_results_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(CSV_HEADER)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    for r in rows {
        w.write_record([
            &r.kind, &r.model, &r.dim, &r.q, &r.t, &r.x0, &r.component, &r.value, &r.stderr,
            &r.oracle, &r.rel_err, &r.extra, &r.verdict,
        ])
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

/// One named pass/fail verdict.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// The summary written next to results.csv.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub kind: String,
    pub model: String,
    pub dim: usize,
    pub seed: u64,
    pub n_paths: usize,
    pub dt: f64,
    pub wall_time_s: f64,
    pub clip_count: usize,
    pub verdicts: Vec<Verdict>,
    pub all_pass: bool,
}

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

pub fn write_summary_json(path: &Path, summary: &RunSummary) -> Result<()> {
    let value = serde_json::to_value(summary)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    validate_summary(&value)?;
    let mut file = std::fs::File::create(path)?;
    let text = serde_json::to_string_pretty(&value)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    file.write_all(text.as_bytes())?;
    file.write_all(b"\n")?;
    Ok(())
}

/// The JSON schema shipped at docs/summary.schema.json, embedded so the
/// emitted summary is validated against the same document.
pub const SUMMARY_SCHEMA: &str = include_str!("../../../docs/summary.schema.json");

/// Minimal JSON-schema validation (type / required / properties / items)
/// covering the subset the shipped schema uses.
pub fn validate_summary(value: &serde_json::Value) -> Result<()> {
    let schema: serde_json::Value = serde_json::from_str(SUMMARY_SCHEMA)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    validate_value(value, &schema, "$")
}

fn validate_value(value: &serde_json::Value, schema: &serde_json::Value, path: &str) -> Result<()> {
    use serde_json::Value;
    if let Some(ty) = schema.get("type").and_then(|t| t.as_str()) {
        let ok = match ty {
            "object" => value.is_object(),
            "array" => value.is_array(),
            "string" => value.is_string(),
            "number" => value.is_number(),
            "integer" => value.is_i64() || value.is_u64(),
            "boolean" => value.is_boolean(),
            _ => true,
        };
        if !ok {
            return Err(Error::Input(format!(
                "summary schema violation at {path}: expected {ty}"
            )));
        }
    }
    if let Some(req) = schema.get("required").and_then(|r| r.as_array()) {
        for name in req {
            let name = name.as_str().unwrap_or("");
            if value.get(name).is_none() {
                return Err(Error::Input(format!(
                    "summary schema violation at {path}: missing '{name}'"
                )));
            }
        }
    }
    if let (Some(props), Value::Object(map)) = (schema.get("properties"), value) {
        if let Some(props) = props.as_object() {
            for (k, v) in map {
                if let Some(sub) = props.get(k) {
                    validate_value(v, sub, &format!("{path}.{k}"))?;
                }
            }
        }
    }
    if let (Some(items), Value::Array(arr)) = (schema.get("items"), value) {
        for (i, v) in arr.iter().enumerate() {
            validate_value(v, items, &format!("{path}[{i}]"))?;
        }
    }
    Ok(())
}
