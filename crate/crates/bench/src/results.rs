//! Result rows and their CSV / JSON forms.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

pub const RESULTS_FORMAT_VERSION: u32 = 1;

pub const RESULTS_HEADER: [&str; 10] = [
    "format_version",
    "trial",
    "k",
    "method",
    "min_snr_db",
    "subset",
    "lambda_star",
    "sca_iters",
    "mp_iters",
    "wall_ms",
];

pub const SUMMARY_HEADER: [&str; 5] = ["method", "k", "rows", "mean_snr_db", "mean_time_ms"];

pub const METHOD_SPMP: &str = "spmp-sca";
pub const METHOD_ORACLE: &str = "oracle";

/// One `(trial, K, method)` outcome. Failed rows keep `error` and leave the
/// numeric fields empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub trial: u64,
    pub k: usize,
    pub method: String,
    pub min_snr_db: Option<f64>,
    pub subset: Vec<usize>,
    pub lambda_star: Option<f64>,
    pub sca_iters: Option<usize>,
    pub mp_iters: Option<usize>,
    pub wall_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ResultRow {
    pub fn failed(trial: u64, k: usize, method: &str, error: String) -> Self {
        Self {
            trial,
            k,
            method: method.to_string(),
            min_snr_db: None,
            subset: Vec::new(),
            lambda_star: None,
            sca_iters: None,
            mp_iters: None,
            wall_ms: None,
            error: Some(error),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub k: usize,
    pub rows: usize,
    pub mean_snr_db: Option<f64>,
    pub mean_time_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsDocument {
    pub format_version: u32,
    pub config: ExperimentConfig,
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Means over successful rows, grouped by method and K.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(&str, usize), Vec<&ResultRow>> = BTreeMap::new();
    for row in rows.iter().filter(|r| r.is_ok()) {
        groups.entry((row.method.as_str(), row.k)).or_default().push(row);
    }
    groups
        .into_iter()
        .map(|((method, k), rows)| {
            let snr: Vec<f64> = rows.iter().filter_map(|r| r.min_snr_db).collect();
            let time: Vec<f64> = rows.iter().filter_map(|r| r.wall_ms).collect();
            SummaryRow {
                method: method.to_string(),
                k,
                rows: rows.len(),
                mean_snr_db: mean(&snr),
                mean_time_ms: if time.len() == rows.len() { mean(&time) } else { None },
            }
        })
        .collect()
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Antenna indices joined by `;`.
pub fn format_subset(subset: &[usize]) -> String {
    subset.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";")
}

pub fn parse_subset(field: &str) -> std::result::Result<Vec<usize>, std::num::ParseIntError> {
    if field.is_empty() {
        return Ok(Vec::new());
    }
    field.split(';').map(str::parse).collect()
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn csv_bytes(header: &[&str], records: impl Iterator<Item = Vec<String>>, path: &Path) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for rec in records {
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.into_inner().map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

pub fn write_results_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let records = rows.iter().map(|r| {
        vec![
            RESULTS_FORMAT_VERSION.to_string(),
            r.trial.to_string(),
            r.k.to_string(),
            r.method.clone(),
            opt(r.min_snr_db),
            format_subset(&r.subset),
            opt(r.lambda_star),
            opt(r.sca_iters),
            opt(r.mp_iters),
            opt(r.wall_ms),
        ]
    });
    let bytes = csv_bytes(&RESULTS_HEADER, records, path)?;
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn write_summary_csv(summary: &[SummaryRow], path: &Path) -> Result<()> {
    let records = summary.iter().map(|s| {
        vec![
            s.method.clone(),
            s.k.to_string(),
            s.rows.to_string(),
            opt(s.mean_snr_db),
            opt(s.mean_time_ms),
        ]
    });
    let bytes = csv_bytes(&SUMMARY_HEADER, records, path)?;
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Reads a results CSV back into rows (the `error` column is not stored).
pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().ne(RESULTS_HEADER.iter().copied()) {
        return Err(CliError::Validation(format!("{}: unexpected header", path.display())));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let bad = |field: &str| CliError::Parse {
            path: path.to_path_buf(),
            line: i + 2,
            column: 0,
            message: format!("bad {field}"),
        };
        let num = |idx: usize, field: &str| -> Result<Option<f64>> {
            match &rec[idx] {
                "" => Ok(None),
                s => s.parse().map(Some).map_err(|_| bad(field)),
            }
        };
        let int = |idx: usize, field: &str| -> Result<Option<usize>> {
            match &rec[idx] {
                "" => Ok(None),
                s => s.parse().map(Some).map_err(|_| bad(field)),
            }
        };
        rows.push(ResultRow {
            trial: rec[1].parse().map_err(|_| bad("trial"))?,
            k: rec[2].parse().map_err(|_| bad("k"))?,
            method: rec[3].to_string(),
            min_snr_db: num(4, "min_snr_db")?,
            subset: parse_subset(&rec[5]).map_err(|_| bad("subset"))?,
            lambda_star: num(6, "lambda_star")?,
            sca_iters: int(7, "sca_iters")?,
            mp_iters: int(8, "mp_iters")?,
            wall_ms: num(9, "wall_ms")?,
            error: None,
        });
    }
    Ok(rows)
}
