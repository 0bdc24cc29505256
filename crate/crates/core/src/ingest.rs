//! Loading station and reading files into an [`StDataset`].
//!
//! Stations: `station_id,lon,lat` with a header row.
//! Readings: `station_id,timestamp_iso8601,value` with a header row. An empty value,
//! `NA` or `NaN` records an explicitly missing reading.

use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{StDataset, StSeries, Station, ValueRange};

pub const DEFAULT_MIN_SAMPLES: usize = 3;

#[derive(Debug, Clone)]
pub struct LoadOutcome {
    pub dataset: StDataset,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub station_count: usize,
    pub timestamp_count: usize,
    pub missing_fraction: f64,
    pub per_slice_sample_counts: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Parses an ISO-8601 timestamp to UTC epoch seconds (fractional). Timestamps without an
/// offset are taken as UTC.
pub fn parse_timestamp(s: &str) -> Result<f64> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.timestamp() as f64 + dt.timestamp_subsec_nanos() as f64 * 1e-9);
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            let utc = dt.and_utc();
            return Ok(utc.timestamp() as f64 + utc.timestamp_subsec_nanos() as f64 * 1e-9);
        }
    }
    Err(invalid(format!("unparseable timestamp `{s}`")))
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(r)
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

pub fn read_stations<R: Read>(r: R) -> Result<Vec<Station>> {
    let mut rdr = csv_reader(r);
    let mut out: Vec<Station> = Vec::new();
    let mut seen = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        if rec.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected 3 fields, got {}", rec.len()),
            });
        }
        let num = |i: usize, what: &str| -> Result<f64> {
            rec[i].parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("bad {what} `{}`", &rec[i]),
            })
        };
        let st = Station {
            id: rec[0].to_string(),
            lon: num(1, "lon")?,
            lat: num(2, "lat")?,
        };
        st.validate()?;
        if seen.insert(st.id.clone(), out.len()).is_some() {
            return Err(Error::DuplicateStation(st.id));
        }
        out.push(st);
    }
    if out.is_empty() {
        return Err(invalid("stations file lists no stations"));
    }
    Ok(out)
}

/// Builds a dataset from station and reading sources.
///
/// Readings land at step `round((ts - t0) / dt)`; they must sit within one second of that
/// step. Readings outside `[0, T)` are dropped with a warning. Values outside `value_range`
/// are clamped, also with a warning.
pub fn load_dataset<S: Read, R: Read>(
    stations_src: S,
    readings_src: R,
    t0: i64,
    dt: u32,
    steps: usize,
    value_range: ValueRange,
) -> Result<LoadOutcome> {
    if steps < 2 {
        return Err(invalid(format!("T must be >= 2, got {steps}")));
    }
    if dt == 0 {
        return Err(invalid("dt must be positive"));
    }
    let stations = read_stations(stations_src)?;
    let index: HashMap<&str, usize> = stations
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.as_str(), i))
        .collect();

    let mut values: Vec<Vec<Option<f32>>> = vec![vec![None; steps]; stations.len()];
    let mut filled: Vec<Vec<bool>> = vec![vec![false; steps]; stations.len()];
    let mut readings = 0usize;
    let mut clamped = 0usize;
    let mut out_of_window = 0usize;

    let mut rdr = csv_reader(readings_src);
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        if rec.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected 3 fields, got {}", rec.len()),
            });
        }
        readings += 1;
        let &si = index
            .get(&rec[0])
            .ok_or_else(|| Error::UnknownStation(rec[0].to_string()))?;
        let ts = parse_timestamp(&rec[1]).map_err(|_| Error::Parse {
            line,
            message: format!("bad timestamp `{}`", &rec[1]),
        })?;
        let rel = ts - t0 as f64;
        let step = (rel / dt as f64).round();
        let offset = rel - step * dt as f64;
        if offset.abs() > 1.0 {
            return Err(Error::MisalignedTimestamp {
                timestamp: rec[1].to_string(),
                dt,
                offset,
            });
        }
        if step < 0.0 || step >= steps as f64 {
            out_of_window += 1;
            continue;
        }
        let step = step as usize;
        if filled[si][step] {
            return Err(Error::DuplicateReading {
                station: stations[si].id.clone(),
                step,
            });
        }
        filled[si][step] = true;

        let raw = &rec[2];
        let value = if raw.is_empty() || raw.eq_ignore_ascii_case("na") || raw.eq_ignore_ascii_case("nan")
        {
            None
        } else {
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad value `{raw}`"),
            })?;
            if !v.is_finite() {
                None
            } else {
                if !value_range.contains(v) {
                    clamped += 1;
                }
                Some(value_range.clamp(v) as f32)
            }
        };
        values[si][step] = value;
    }
    if readings == 0 {
        return Err(Error::NoReadings);
    }

    let mut warnings = Vec::new();
    if clamped > 0 {
        warnings.push(format!(
            "{clamped} reading(s) outside [{}, {}] were clamped",
            value_range.min, value_range.max
        ));
    }
    if out_of_window > 0 {
        warnings.push(format!(
            "{out_of_window} reading(s) fall outside the {steps}-step window and were ignored"
        ));
    }

    let series = stations
        .iter()
        .zip(values)
        .map(|(st, values)| StSeries {
            station_id: st.id.clone(),
            values,
        })
        .collect();
    let dataset = StDataset::new(stations, series, t0, dt, steps, value_range)?;
    Ok(LoadOutcome { dataset, warnings })
}

pub fn load_dataset_paths(
    stations: impl AsRef<Path>,
    readings: impl AsRef<Path>,
    t0: i64,
    dt: u32,
    steps: usize,
    value_range: ValueRange,
) -> Result<LoadOutcome> {
    load_dataset(
        File::open(stations)?,
        File::open(readings)?,
        t0,
        dt,
        steps,
        value_range,
    )
}

/// Per-slice sample counts, overall missing fraction, and one warning per slice with fewer
/// than `min_samples` present readings.
pub fn validate_dataset(ds: &StDataset, min_samples: usize) -> ValidationReport {
    let steps = ds.steps();
    let mut counts = vec![0usize; steps];
    for s in ds.series() {
        for (c, v) in counts.iter_mut().zip(&s.values) {
            if v.is_some() {
                *c += 1;
            }
        }
    }
    let total = ds.station_count() * steps;
    let present: usize = counts.iter().sum();
    let warnings = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c < min_samples)
        .map(|(t, &c)| format!("slice {t} has {c} present value(s), fewer than {min_samples}"))
        .collect();
    ValidationReport {
        station_count: ds.station_count(),
        timestamp_count: steps,
        missing_fraction: (total - present) as f64 / total as f64,
        per_slice_sample_counts: counts,
        warnings,
    }
}
