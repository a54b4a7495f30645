//! CSV rows written by the harness.
//!
//! Every file has a header row, comma separators and `.` decimals. Reals are
//! written with exactly six decimals, so parsing a file and writing it again
//! reproduces it byte for byte. Missing values are empty fields.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize, Serializer};

use super::config::SweepPoint;
use crate::error::{Error, Result};

pub const DECIMALS: usize = 6;

fn fixed<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{x:.DECIMALS$}"))
}

fn fixed_opt<S: Serializer>(x: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(v) => fixed(v, s),
        None => s.serialize_str(""),
    }
}

/// Outcome of evaluating one sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    Unstable,
    NotConverged,
    Failed,
}

impl Status {
    pub fn of_error(e: &Error) -> Status {
        match e {
            Error::Unstable { .. } => Status::Unstable,
            Error::NonConvergence { .. } => Status::NotConverged,
            _ => Status::Failed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    #[serde(serialize_with = "fixed")]
    pub rate: f64,
    #[serde(serialize_with = "fixed")]
    pub burst_prob: f64,
    #[serde(serialize_with = "fixed")]
    pub deflect_prob: f64,
    pub class: usize,
    pub source: usize,
    pub destination: usize,
    #[serde(serialize_with = "fixed")]
    pub class_rate: f64,
    pub static_latency: u32,
    #[serde(serialize_with = "fixed")]
    pub source_wait: f64,
    #[serde(serialize_with = "fixed")]
    pub junction_wait: f64,
    #[serde(serialize_with = "fixed")]
    pub deflection_delay: f64,
    #[serde(serialize_with = "fixed")]
    pub latency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    #[serde(serialize_with = "fixed")]
    pub rate: f64,
    #[serde(serialize_with = "fixed")]
    pub burst_prob: f64,
    #[serde(serialize_with = "fixed")]
    pub deflect_prob: f64,
    pub status: Status,
    #[serde(serialize_with = "fixed_opt")]
    pub average_latency: Option<f64>,
    /// Deflection events per cycle summed over all loops.
    #[serde(serialize_with = "fixed_opt")]
    pub deflected_rate: Option<f64>,
    pub clamp_events: u32,
    pub iterations: usize,
    pub converged: bool,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRow {
    #[serde(serialize_with = "fixed")]
    pub rate: f64,
    #[serde(serialize_with = "fixed")]
    pub burst_prob: f64,
    #[serde(serialize_with = "fixed")]
    pub deflect_prob: f64,
    pub seed: u64,
    #[serde(serialize_with = "fixed")]
    pub mean_latency: f64,
    pub p50_latency: u64,
    pub p99_latency: u64,
    pub measured: u64,
    pub injected: u64,
    pub delivered: u64,
    pub in_flight: u64,
    #[serde(serialize_with = "fixed")]
    pub deflected_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    #[serde(serialize_with = "fixed")]
    pub rate: f64,
    #[serde(serialize_with = "fixed")]
    pub burst_prob: f64,
    #[serde(serialize_with = "fixed")]
    pub deflect_prob: f64,
    pub status: Status,
    #[serde(serialize_with = "fixed_opt")]
    pub model_latency: Option<f64>,
    #[serde(serialize_with = "fixed_opt")]
    pub sim_latency: Option<f64>,
    /// Half-width of the 95% confidence interval over seeds.
    #[serde(serialize_with = "fixed_opt")]
    pub sim_ci95: Option<f64>,
    pub seeds: usize,
    /// `|model - sim| / sim * 100`.
    #[serde(serialize_with = "fixed_opt")]
    pub error_pct: Option<f64>,
    #[serde(serialize_with = "fixed_opt")]
    pub signed_error_pct: Option<f64>,
    pub clamp_events: u32,
    pub iterations: usize,
    pub converged: bool,
    pub note: String,
}

impl ComparisonRow {
    pub fn point(&self) -> SweepPoint {
        SweepPoint {
            rate: self.rate,
            burst_prob: self.burst_prob,
            deflect_prob: self.deflect_prob,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub points: usize,
    pub skipped: usize,
    #[serde(serialize_with = "fixed_opt")]
    pub mean_error_pct: Option<f64>,
    #[serde(serialize_with = "fixed_opt")]
    pub median_error_pct: Option<f64>,
    #[serde(serialize_with = "fixed_opt")]
    pub max_error_pct: Option<f64>,
    #[serde(serialize_with = "fixed_opt")]
    pub signed_mean_error_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub rows: usize,
    pub cols: usize,
    pub nodes: usize,
    pub classes: usize,
    pub mode: String,
    #[serde(serialize_with = "fixed")]
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopAccuracy {
    #[serde(serialize_with = "fixed")]
    pub rate: f64,
    #[serde(serialize_with = "fixed")]
    pub burst_prob: f64,
    #[serde(serialize_with = "fixed")]
    pub deflect_prob: f64,
    pub orientation: String,
    pub index: usize,
    /// Deflection events per cycle.
    #[serde(serialize_with = "fixed")]
    pub model_rate: f64,
    #[serde(serialize_with = "fixed")]
    pub sim_rate: f64,
    #[serde(serialize_with = "fixed")]
    pub accuracy_pct: f64,
    /// Both rates are zero, so the accuracy is vacuous.
    pub degenerate: bool,
}

pub fn to_csv_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn from_csv_str<T: DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Writes `rows` with a header, creating parent directories. The header
/// comes from the first row, so an empty slice gives an empty file.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, to_csv_string(rows)?)?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    from_csv_str(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comparison_rows_round_trip() {
        let rows = vec![
            ComparisonRow {
                rate: 0.1,
                burst_prob: 0.6,
                deflect_prob: 0.3,
                status: Status::Ok,
                model_latency: Some(7.123456789),
                sim_latency: Some(7.0),
                sim_ci95: Some(0.01),
                seeds: 5,
                error_pct: Some(1.76),
                signed_error_pct: Some(1.76),
                clamp_events: 0,
                iterations: 31,
                converged: true,
                note: String::new(),
            },
            ComparisonRow {
                rate: 0.4,
                burst_prob: 0.6,
                deflect_prob: 0.3,
                status: Status::Unstable,
                model_latency: None,
                sim_latency: None,
                sim_ci95: None,
                seeds: 0,
                error_pct: None,
                signed_error_pct: None,
                clamp_events: 0,
                iterations: 0,
                converged: false,
                note: "saturated server row 0, utilization 1.2".into(),
            },
        ];
        let text = to_csv_string(&rows).unwrap();
        assert!(text.starts_with("rate,burst_prob,deflect_prob,status,model_latency"));
        assert!(text.contains("7.123457"));
        assert!(text.contains(",unstable,"));
        let back: Vec<ComparisonRow> = from_csv_str(&text).unwrap();
        assert_eq!(back[1], rows[1]);
        assert_eq!(to_csv_string(&back).unwrap(), text);
    }
}
