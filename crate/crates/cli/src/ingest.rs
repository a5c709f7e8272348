//! CSV time-series ingestion into hourly [`EnergySeries`].
//!
//! Input files have the header `timestamp,value` and one sample per line. Timestamps are
//! ISO-8601 (RFC 3339, or without offset meaning UTC) and mark the beginning of each sample
//! period. Sub-hourly samples are aggregated per hour according to the declared unit.

use std::fs::File;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, Timelike, Utc};
use recopt_core::{eur_per_mwh, EnergySeries};
use serde::Deserialize;
use thiserror::Error;

/// Largest run of missing samples that is filled by linear interpolation.
pub const MAX_GAP_SECONDS: i64 = 2 * 3600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum Unit {
    /// Energy per sample; summed per hour.
    #[serde(rename = "kWh")]
    KWh,
    /// Average power over the sample; multiplied by the sample length, then summed.
    #[serde(rename = "kW")]
    KW,
    /// Price; averaged per hour and converted to €/kWh.
    #[serde(rename = "EUR/MWh")]
    EurPerMWh,
    #[serde(rename = "EUR/kWh")]
    EurPerKWh,
}

impl Unit {
    pub fn is_price(self) -> bool {
        matches!(self, Unit::EurPerMWh | Unit::EurPerKWh)
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: timestamp does not increase")]
    NonMonotoneTimestamps { line: u64 },
    #[error("line {line}: gap of {seconds} s exceeds the {MAX_GAP_SECONDS} s interpolation limit")]
    GapTooLarge { line: u64, seconds: i64 },
}

fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .map(|n| n.and_utc())
}

struct Sample {
    line: u64,
    t: DateTime<Utc>,
    v: f64,
}

fn read_samples(path: &Path) -> Result<Vec<Sample>, IngestError> {
    let file = File::open(path).map_err(|e| IngestError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let parse_err = |line: u64, message: String| IngestError::Parse { line, message };
    let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?;
    if headers.len() != 2 || &headers[0] != "timestamp" || &headers[1] != "value" {
        return Err(parse_err(1, "expected header `timestamp,value`".into()));
    }
    let mut samples = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let t = parse_timestamp(&record[0]).ok_or_else(|| parse_err(line, format!("bad timestamp `{}`", &record[0])))?;
        let v: f64 = record[1]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| parse_err(line, format!("bad value `{}`", &record[1])))?;
        if let Some(prev) = samples.last().map(|s: &Sample| s.t) {
            if t <= prev {
                return Err(IngestError::NonMonotoneTimestamps { line });
            }
        }
        samples.push(Sample { line, t, v });
    }
    if samples.is_empty() {
        return Err(parse_err(1, "no data rows".into()));
    }
    Ok(samples)
}

/// Reads one series file and aggregates it to hourly values in canonical units
/// (kWh for energy, €/kWh for prices).
pub fn ingest_series(path: &Path, unit: Unit) -> Result<EnergySeries, IngestError> {
    let samples = read_samples(path)?;
    let first = &samples[0];
    let parse_err = |line: u64, message: String| IngestError::Parse { line, message };
    if first.t.minute() != 0 || first.t.second() != 0 || first.t.nanosecond() != 0 {
        return Err(parse_err(first.line, "first timestamp must fall on the hour".into()));
    }

    let step = samples
        .windows(2)
        .map(|w| (w[1].t - w[0].t).num_seconds())
        .min()
        .unwrap_or(3600)
        .min(3600);
    if step <= 0 || step > 3600 || 3600 % step != 0 {
        return Err(parse_err(first.line, format!("sample interval of {step} s does not divide one hour")));
    }

    // Regular grid of samples with short gaps filled linearly.
    let mut grid = vec![first.v];
    for w in samples.windows(2) {
        let dt = (w[1].t - w[0].t).num_seconds();
        if dt % step != 0 {
            return Err(parse_err(w[1].line, format!("timestamp is off the {step} s sample grid")));
        }
        let missing = dt / step - 1;
        if missing > 0 {
            if missing * step > MAX_GAP_SECONDS {
                return Err(IngestError::GapTooLarge {
                    line: w[1].line,
                    seconds: missing * step,
                });
            }
            for i in 1..=missing {
                let f = i as f64 / (missing + 1) as f64;
                grid.push(w[0].v + f * (w[1].v - w[0].v));
            }
        }
        grid.push(w[1].v);
    }

    let per_hour = (3600 / step) as usize;
    if grid.len() % per_hour != 0 {
        return Err(parse_err(
            samples[samples.len() - 1].line,
            format!("last hour is incomplete ({} of {per_hour} samples)", grid.len() % per_hour),
        ));
    }
    let hours_per_sample = step as f64 / 3600.0;
    let values = grid
        .chunks(per_hour)
        .map(|c| match unit {
            Unit::KWh => c.iter().sum::<f64>(),
            Unit::KW => c.iter().map(|p| p * hours_per_sample).sum::<f64>(),
            Unit::EurPerKWh => c.iter().sum::<f64>() / c.len() as f64,
            Unit::EurPerMWh => eur_per_mwh(c.iter().sum::<f64>() / c.len() as f64),
        })
        .collect();
    EnergySeries::new(first.t, values).map_err(|e| parse_err(first.line, e.to_string()))
}
