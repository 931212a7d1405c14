//! CSV tables and the JSON sidecar.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, SCHEMA_VERSION};
use crate::error::{Error, Result};

/// Column order of the main result table.
pub const RESULT_COLUMNS: [&str; 11] = [
    "experiment",
    "snr_db",
    "method",
    "receiver",
    "architecture",
    "user",
    "se",
    "stderr",
    "power_mw",
    "ee",
    "seed",
];

/// One SE value for one user (1-based id) or for the sum (`SUM`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub snr_db: f64,
    pub method: String,
    pub receiver: String,
    pub architecture: String,
    pub user: String,
    pub se: f64,
    pub stderr: f64,
    pub power_mw: f64,
    /// bits/Joule; only on `SUM` rows.
    pub ee: Option<f64>,
    pub seed: u64,
}

impl ResultRow {
    pub fn is_sum(&self) -> bool {
        self.user == "SUM"
    }
}

/// Scheduling decision for one user at one operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRow {
    pub experiment: String,
    pub snr_db: f64,
    pub receiver: String,
    pub architecture: String,
    pub user: usize,
    pub scheduled: bool,
    /// 1-based position in the greedy order; 0 when not scheduled.
    pub order: usize,
    /// Space-separated subarray indices; empty when every subarray is on.
    pub subarrays: String,
    pub vr_start: usize,
    pub vr_end: usize,
}

/// Antenna range of each user's VR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VrMapRow {
    pub experiment: String,
    pub user: usize,
    pub vr_start: usize,
    pub vr_end: usize,
    pub mean_aoa: f64,
    pub angular_std: f64,
}

/// Greedy schedule against the exhaustive optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleOracleRow {
    pub experiment: String,
    pub snr_db: f64,
    pub receiver: String,
    pub architecture: String,
    pub greedy_se: f64,
    pub oracle_se: f64,
    pub ratio: f64,
    pub greedy_users: String,
    pub oracle_users: String,
}

/// Closed form against Monte-Carlo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeOracleRow {
    pub experiment: String,
    pub snr_db: f64,
    pub receiver: String,
    pub architecture: String,
    pub user: String,
    pub monte_carlo: f64,
    pub stderr: f64,
    pub closed_form: f64,
    pub rel_error: f64,
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::config("--out", format!("{}: {e}", path.display()))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_error(path, e))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<ResultRow>, _>>()
        .map_err(|e| io_error(path, e))
}

#[derive(Serialize)]
struct Sidecar<'a> {
    schema_version: u32,
    generator: &'static str,
    columns: &'a [&'a str],
    config: &'a ExperimentConfig,
}

/// Resolved config next to the CSV it produced.
pub fn write_sidecar(path: &Path, config: &ExperimentConfig) -> Result<()> {
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    let sidecar = Sidecar {
        schema_version: SCHEMA_VERSION,
        generator: concat!("xlmimo ", env!("CARGO_PKG_VERSION")),
        columns: &RESULT_COLUMNS,
        config,
    };
    serde_json::to_writer_pretty(BufWriter::new(file), &sidecar).map_err(|e| io_error(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), value).map_err(|e| io_error(path, e))
}
