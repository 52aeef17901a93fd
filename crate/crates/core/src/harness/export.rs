//! CSV and manifest output.
//!
//! The CSV is long format, one row per (record, round), with the fixed header
//! [`CSV_HEADER`]. Floats are written in shortest round-trip form, so
//! importing a file gives back exactly the values that were exported. Timing
//! goes only into the manifest, which keeps the CSV byte-stable.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BoundReport, ExperimentConfig, RunRecord, SweepTable};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 6] = ["algorithm", "seed", "round", "loss", "bound", "allocation_digest"];

/// One CSV line. `bound` is empty when no bound was computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub algorithm: String,
    pub seed: u64,
    pub round: usize,
    pub loss: f64,
    pub bound: Option<f64>,
    pub allocation_digest: String,
}

impl CsvRow {
    pub fn from_records(records: &[RunRecord]) -> Vec<CsvRow> {
        records
            .iter()
            .flat_map(|r| {
                let digest = r.allocation_digest();
                r.losses.iter().enumerate().map(move |(t, &loss)| CsvRow {
                    algorithm: r.algorithm.name().to_string(),
                    seed: r.seed,
                    round: t,
                    loss,
                    bound: r.bound.as_ref().map(|b| b[t]),
                    allocation_digest: digest.clone(),
                })
            })
            .collect()
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn export_csv(records: &[RunRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Domain("nothing to export".into()));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(CSV_HEADER).map_err(csv_err(path))?;
    for row in CsvRow::from_records(records) {
        w.write_record([
            row.algorithm,
            row.seed.to_string(),
            row.round.to_string(),
            row.loss.to_string(),
            row.bound.map_or_else(String::new, |b| b.to_string()),
            row.allocation_digest,
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn import_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Domain(format!(
            "{}: unexpected header {:?}",
            path.display(),
            header.iter().collect::<Vec<_>>()
        )));
    }
    r.deserialize().map(|row| row.map_err(csv_err(path))).collect()
}

/// Everything needed to reproduce and audit a run: the resolved config, full
/// records (allocations included) and timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub csv_file: String,
    pub records: Vec<RunRecord>,
    pub total_wall_clock_s: f64,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Serde(format!("{}: {e}", path.display())))
    }
}

pub fn write_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest).map_err(|e| Error::Serde(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Aggregated sweep: `axis,value,algorithm,n,final_loss_mean,final_loss_std,
/// excess_loss_mean,excess_loss_std,iterations_mean,iterations_std`.
pub fn write_sweep_csv(table: &SweepTable, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record([
        "axis",
        "value",
        "algorithm",
        "n",
        "final_loss_mean",
        "final_loss_std",
        "excess_loss_mean",
        "excess_loss_std",
        "iterations_mean",
        "iterations_std",
    ])
    .map_err(csv_err(path))?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
    for row in &table.rows {
        w.write_record([
            table.axis.name().to_string(),
            row.value.to_string(),
            row.algorithm.name().to_string(),
            row.final_loss.n.to_string(),
            row.final_loss.mean.to_string(),
            row.final_loss.std.to_string(),
            row.final_excess_loss.mean.to_string(),
            row.final_excess_loss.std.to_string(),
            opt(row.iterations.map(|s| s.mean)),
            opt(row.iterations.map(|s| s.std)),
        ])
        .map_err(csv_err(path))?;
    }
    let mut inner = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    inner.flush().map_err(|e| Error::io(path, e))
}

/// Bound report as `round,bound,empirical_gap`.
pub fn write_bound_csv(report: &BoundReport, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["round", "bound", "empirical_gap"]).map_err(csv_err(path))?;
    for (t, (b, g)) in report.series.per_step_bound.iter().zip(&report.empirical_gap).enumerate() {
        w.write_record([t.to_string(), b.to_string(), g.to_string()])
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
