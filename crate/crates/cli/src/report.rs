//! Report records and their CSV / JSON serializations.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::{Format, RunConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// One numeric result. `error_bar` is the numerical accuracy of `value`;
/// `reference`/`tolerance`/`pass` are present when the value is checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub quantity: String,
    /// Sweep coordinate or index, e.g. "eps=0.001" or "i=1"; empty if none.
    pub key: String,
    pub value: f64,
    pub unit: String,
    pub error_bar: f64,
    pub reference: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: Option<bool>,
    pub note: String,
}

impl Record {
    pub fn new(quantity: &str, key: impl Into<String>, value: f64, error_bar: f64) -> Self {
        Self {
            quantity: quantity.to_string(),
            key: key.into(),
            value,
            unit: "1".to_string(),
            error_bar,
            reference: None,
            tolerance: None,
            pass: None,
            note: String::new(),
        }
    }

    pub fn unit(mut self, unit: &str) -> Self {
        self.unit = unit.to_string();
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    /// Attach a reference value without a pass flag.
    pub fn reference(mut self, reference: f64) -> Self {
        self.reference = Some(reference);
        self
    }

    /// Pass iff |value - reference| ≤ tolerance.
    pub fn within(mut self, reference: f64, tolerance: f64) -> Self {
        self.reference = Some(reference);
        self.tolerance = Some(tolerance);
        self.pass = Some((self.value - reference).abs() <= tolerance);
        self
    }

    /// Pass iff |value/reference - 1| ≤ tolerance.
    pub fn within_rel(mut self, reference: f64, tolerance: f64) -> Self {
        self.reference = Some(reference);
        self.tolerance = Some(tolerance);
        self.pass = Some(((self.value - reference) / reference).abs() <= tolerance);
        self
    }

    pub fn flag(mut self, pass: bool) -> Self {
        self.pass = Some(pass);
        self
    }

    pub fn failure(message: impl Into<String>) -> Self {
        Self::new("error", "", f64::NAN, f64::NAN)
            .flag(false)
            .note(message)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    pub angular_order: usize,
    /// Node counts of the grids a command used.
    pub grids: BTreeMap<String, usize>,
    /// Only filled with `--wall-time`.
    pub wall_time_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub params: RunConfig,
    pub records: Vec<Record>,
    pub provenance: Provenance,
    /// True iff every record flag is true.
    pub pass: bool,
}

impl Report {
    pub fn finish(
        command: &str,
        params: RunConfig,
        records: Vec<Record>,
        provenance: Provenance,
    ) -> Self {
        let pass = records.iter().all(|r| r.pass != Some(false));
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            params,
            records,
            provenance,
            pass,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(|r| r.pass == Some(false))
    }
}

pub fn to_json(report: &Report) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

pub fn to_csv(records: &[Record]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    if records.is_empty() {
        w.write_record([
            "quantity",
            "key",
            "value",
            "unit",
            "error_bar",
            "reference",
            "tolerance",
            "pass",
            "note",
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn records_from_csv(text: &str) -> Result<Vec<Record>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize()
        .map(|row| row.context("malformed CSV row"))
        .collect()
}

pub fn render(report: &Report, format: Format) -> Result<String> {
    match format {
        Format::Json => to_json(report),
        Format::Csv => to_csv(&report.records),
    }
}

/// Two-column (r, value) CSV of a sampled radial field.
pub fn field_csv(nodes: &[f64], values: &[f64]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["r", "value"])?;
    for (r, v) in nodes.iter().zip(values) {
        w.serialize((r, v))?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Writes `<dir>/<command>.<ext>`, or to stdout without a directory.
pub fn emit(report: &Report, format: Format, out: Option<&Path>) -> Result<Option<PathBuf>> {
    let text = render(report, format)?;
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join(format!("{}.{}", report.command, format.extension()));
            fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            Ok(Some(path))
        }
        None => {
            std::io::stdout().lock().write_all(text.as_bytes())?;
            Ok(None)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks_set_flags() {
        assert_eq!(
            Record::new("x", "", 1.0005, 0.0).within(1.0, 1e-3).pass,
            Some(true)
        );
        assert_eq!(
            Record::new("x", "", 1.1, 0.0).within_rel(1.0, 0.05).pass,
            Some(false)
        );
        assert_eq!(Record::new("x", "", 1.1, 0.0).reference(1.0).pass, None);
    }

    #[test]
    fn csv_round_trip() {
        let records = vec![
            Record::new("a", "eps=0.001", 0.1 + 0.2, 1e-12).within(0.3, 1e-9),
            Record::new("b", "", -1.0 / 3.0, 0.0)
                .unit("r")
                .note("with, comma"),
        ];
        let text = to_csv(&records).unwrap();
        assert!(
            text.starts_with("quantity,key,value,unit,error_bar,reference,tolerance,pass,note\n")
        );
        assert_eq!(records_from_csv(&text).unwrap(), records);
    }
}
