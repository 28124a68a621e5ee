//! Time-series data model: CSV ingestion, resampling, peak scaling, PV sizing
//! and net-load decomposition.
//!
//! All power samples are interval-average MW over `dt` hours, not instantaneous
//! values; higher peaks can occur inside one interval and are invisible at this
//! resolution. Every type is immutable after construction and every operation
//! is a pure function.

use chrono::{Duration, NaiveDateTime};
use std::fmt;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;
use thiserror::Error;

/// Interval lengths accepted for ingested data, in hours (15 min and 1 h).
pub const ALLOWED_DT_HOURS: [f64; 2] = [0.25, 1.0];

/// Longest supported series: one leap year.
pub const MAX_COVERAGE_HOURS: f64 = 8784.0;

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("row {row}: malformed row: {detail}")]
    MalformedRow { row: usize, detail: String },
    #[error("row {row}: non-uniform spacing: expected {expected}, found {found}")]
    NonUniformSpacing {
        row: usize,
        expected: NaiveDateTime,
        found: NaiveDateTime,
    },
    #[error("row {row}: negative value {value}")]
    NegativeValue { row: usize, value: f64 },
    #[error("sample {index} is negative ({value})")]
    NegativeSample { index: usize, value: f64 },
    #[error("sample {index} ({value}) exceeds the per-unit ceiling of {limit}")]
    AboveUnitCeiling { index: usize, value: f64, limit: f64 },
    #[error("series is empty")]
    EmptySeries,
    #[error("sample {index} is not finite")]
    NonFiniteSample { index: usize },
    #[error("interval of {dt} h is not supported (allowed: 0.25 or 1.0)")]
    InvalidInterval { dt: f64 },
    #[error("series spans {hours} h, more than one year ({MAX_COVERAGE_HOURS} h)")]
    ExceedsOneYear { hours: f64 },
    #[error("cannot resample {from} h data to {to} h: {detail}")]
    IncompatibleResolution { from: f64, to: f64, detail: String },
    #[error("profile has zero peak; cannot scale")]
    ZeroPeak,
    #[error("per-unit PV profile has zero annual yield")]
    ZeroYield,
    #[error("series are misaligned: {detail}")]
    MisalignedSeries { detail: String },
    #[error("missing column `{column}` in CSV header")]
    MissingColumn { column: String },
}

/// A uniformly sampled power series in MW (average power over each interval).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    start_time: NaiveDateTime,
    dt_hours: f64,
    values: Vec<f64>,
}

impl TimeSeries {
    /// Builds a validated series: non-empty, finite samples, a supported
    /// interval and at most one year of coverage.
    pub fn new(
        start_time: NaiveDateTime,
        dt_hours: f64,
        values: Vec<f64>,
    ) -> Result<Self, ProfileError> {
        if !ALLOWED_DT_HOURS.contains(&dt_hours) {
            return Err(ProfileError::InvalidInterval { dt: dt_hours });
        }
        if values.is_empty() {
            return Err(ProfileError::EmptySeries);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(ProfileError::NonFiniteSample { index });
        }
        let hours = values.len() as f64 * dt_hours;
        if hours > MAX_COVERAGE_HOURS {
            return Err(ProfileError::ExceedsOneYear { hours });
        }
        Ok(Self {
            start_time,
            dt_hours,
            values,
        })
    }

    pub fn start_time(&self) -> NaiveDateTime {
        self.start_time
    }

    pub fn dt_hours(&self) -> f64 {
        self.dt_hours
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Timestamp of the start of interval `index`.
    pub fn timestamp(&self, index: usize) -> NaiveDateTime {
        self.start_time + step_duration(self.dt_hours) * index as i32
    }

    /// Total energy content in MWh (sum of samples times the interval length).
    pub fn energy_mwh(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dt_hours
    }

    /// True when both series share start, interval and length.
    pub fn aligned_with(&self, other: &TimeSeries) -> bool {
        self.start_time == other.start_time
            && self.dt_hours == other.dt_hours
            && self.values.len() == other.values.len()
    }

    /// A contiguous sub-series of `len` samples starting at `start`, with the
    /// timestamp base shifted accordingly.
    pub fn slice(&self, start: usize, len: usize) -> TimeSeries {
        assert!(
            start + len <= self.values.len() && len > 0,
            "slice [{start}, {start}+{len}) out of range for length {}",
            self.values.len()
        );
        TimeSeries {
            start_time: self.timestamp(start),
            dt_hours: self.dt_hours,
            values: self.values[start..start + len].to_vec(),
        }
    }

    /// Converts between the 15-min and hourly grids. Downsampling averages
    /// blocks (energy-preserving), upsampling repeats each value
    /// (power-preserving); total energy is conserved either way.
    pub fn resample_to(&self, target_dt: f64) -> Result<TimeSeries, ProfileError> {
        if !ALLOWED_DT_HOURS.contains(&target_dt) {
            return Err(ProfileError::InvalidInterval { dt: target_dt });
        }
        if target_dt == self.dt_hours {
            return Ok(self.clone());
        }
        if target_dt > self.dt_hours {
            let ratio = target_dt / self.dt_hours;
            let block = ratio.round() as usize;
            if (ratio - block as f64).abs() > 1e-9 {
                return Err(ProfileError::IncompatibleResolution {
                    from: self.dt_hours,
                    to: target_dt,
                    detail: format!("{target_dt} is not an integer multiple of {}", self.dt_hours),
                });
            }
            if !self.values.len().is_multiple_of(block) {
                return Err(ProfileError::IncompatibleResolution {
                    from: self.dt_hours,
                    to: target_dt,
                    detail: format!("length {} is not a multiple of {block}", self.values.len()),
                });
            }
            let values = self
                .values
                .chunks_exact(block)
                .map(|c| c.iter().sum::<f64>() / block as f64)
                .collect();
            TimeSeries::new(self.start_time, target_dt, values)
        } else {
            let ratio = self.dt_hours / target_dt;
            let repeat = ratio.round() as usize;
            if (ratio - repeat as f64).abs() > 1e-9 {
                return Err(ProfileError::IncompatibleResolution {
                    from: self.dt_hours,
                    to: target_dt,
                    detail: format!("{} is not an integer multiple of {target_dt}", self.dt_hours),
                });
            }
            let mut values = Vec::with_capacity(self.values.len() * repeat);
            for &v in &self.values {
                values.extend(std::iter::repeat_n(v, repeat));
            }
            TimeSeries::new(self.start_time, target_dt, values)
        }
    }
}

fn step_duration(dt_hours: f64) -> Duration {
    Duration::seconds((dt_hours * 3600.0).round() as i64)
}

/// Column names used when reading profile CSVs.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub timestamp_column: String,
    pub value_column: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            timestamp_column: "timestamp".to_string(),
            value_column: "value".to_string(),
        }
    }
}

/// Reads a profile CSV (header `timestamp,value`, ISO-8601 timestamps) and
/// validates strict time ordering with uniform spacing equal to `dt_hours`.
/// Gaps, duplicates, NaN and negative values are rejected; every error names
/// the offending 1-based data row.
pub fn ingest_csv<P: AsRef<Path>>(
    path: P,
    schema: &CsvSchema,
    dt_hours: f64,
) -> Result<TimeSeries, ProfileError> {
    if !ALLOWED_DT_HOURS.contains(&dt_hours) {
        return Err(ProfileError::InvalidInterval { dt: dt_hours });
    }
    let file = File::open(path.as_ref())?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));

    let headers = reader
        .headers()
        .map_err(|e| ProfileError::MalformedRow {
            row: 0,
            detail: e.to_string(),
        })?
        .clone();
    let ts_col = headers
        .iter()
        .position(|h| h == schema.timestamp_column)
        .ok_or_else(|| ProfileError::MissingColumn {
            column: schema.timestamp_column.clone(),
        })?;
    let value_col = headers
        .iter()
        .position(|h| h == schema.value_column)
        .ok_or_else(|| ProfileError::MissingColumn {
            column: schema.value_column.clone(),
        })?;

    let step = step_duration(dt_hours);
    let mut start_time = None;
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| ProfileError::MalformedRow {
            row,
            detail: e.to_string(),
        })?;
        let ts_field = record.get(ts_col).ok_or_else(|| ProfileError::MalformedRow {
            row,
            detail: "missing timestamp field".to_string(),
        })?;
        let value_field = record
            .get(value_col)
            .ok_or_else(|| ProfileError::MalformedRow {
                row,
                detail: "missing value field".to_string(),
            })?;
        let ts = NaiveDateTime::parse_from_str(ts_field, TIMESTAMP_FORMAT).map_err(|e| {
            ProfileError::MalformedRow {
                row,
                detail: format!("bad timestamp `{ts_field}`: {e}"),
            }
        })?;
        let value: f64 = value_field.parse().map_err(|e| ProfileError::MalformedRow {
            row,
            detail: format!("bad value `{value_field}`: {e}"),
        })?;
        if !value.is_finite() {
            return Err(ProfileError::MalformedRow {
                row,
                detail: format!("non-finite value `{value_field}`"),
            });
        }
        if value < 0.0 {
            return Err(ProfileError::NegativeValue { row, value });
        }
        match start_time {
            None => start_time = Some(ts),
            Some(start) => {
                let expected = start + step * values.len() as i32;
                if ts != expected {
                    return Err(ProfileError::NonUniformSpacing {
                        row,
                        expected,
                        found: ts,
                    });
                }
            }
        }
        values.push(value);
    }
    let start_time = start_time.ok_or(ProfileError::EmptySeries)?;
    TimeSeries::new(start_time, dt_hours, values)
}

/// Like [`ingest_csv`] but infers the interval from the first two rows.
pub fn ingest_csv_auto<P: AsRef<Path>>(
    path: P,
    schema: &CsvSchema,
) -> Result<TimeSeries, ProfileError> {
    let dt = infer_dt_hours(path.as_ref(), schema)?;
    ingest_csv(path, schema, dt)
}

fn infer_dt_hours(path: &Path, schema: &CsvSchema) -> Result<f64, ProfileError> {
    let file = File::open(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let headers = reader
        .headers()
        .map_err(|e| ProfileError::MalformedRow {
            row: 0,
            detail: e.to_string(),
        })?
        .clone();
    let ts_col = headers
        .iter()
        .position(|h| h == schema.timestamp_column)
        .ok_or_else(|| ProfileError::MissingColumn {
            column: schema.timestamp_column.clone(),
        })?;
    let mut first_two = Vec::new();
    for (i, record) in reader.records().take(2).enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| ProfileError::MalformedRow {
            row,
            detail: e.to_string(),
        })?;
        let ts_field = record.get(ts_col).ok_or_else(|| ProfileError::MalformedRow {
            row,
            detail: "missing timestamp field".to_string(),
        })?;
        let ts = NaiveDateTime::parse_from_str(ts_field, TIMESTAMP_FORMAT).map_err(|e| {
            ProfileError::MalformedRow {
                row,
                detail: format!("bad timestamp `{ts_field}`: {e}"),
            }
        })?;
        first_two.push(ts);
    }
    if first_two.len() < 2 {
        // Single-row file: any allowed interval is consistent; pick hourly.
        return Ok(1.0);
    }
    let dt = (first_two[1] - first_two[0]).num_seconds() as f64 / 3600.0;
    if !ALLOWED_DT_HOURS.contains(&dt) {
        return Err(ProfileError::InvalidInterval { dt });
    }
    Ok(dt)
}

/// Writes the series in the exact format `ingest_csv` accepts, so profile
/// outputs round-trip. Values carry six decimal places.
pub fn write_csv<W: Write>(writer: &mut W, series: &TimeSeries) -> std::io::Result<()> {
    writeln!(writer, "timestamp,value")?;
    for (i, v) in series.values().iter().enumerate() {
        writeln!(
            writer,
            "{},{:.6}",
            series.timestamp(i).format(TIMESTAMP_FORMAT),
            v
        )?;
    }
    Ok(())
}

pub fn write_csv_path<P: AsRef<Path>>(path: P, series: &TimeSeries) -> std::io::Result<()> {
    let mut file = std::io::BufWriter::new(File::create(path)?);
    write_csv(&mut file, series)?;
    file.flush()
}

/// A community load profile: non-negative MW with cached peak and annual energy.
#[derive(Debug, Clone)]
pub struct LoadProfile {
    series: TimeSeries,
    peak_mw: f64,
    annual_energy_mwh: f64,
}

impl LoadProfile {
    pub fn new(series: TimeSeries) -> Result<Self, ProfileError> {
        if let Some((index, &value)) = series
            .values()
            .iter()
            .enumerate()
            .find(|(_, v)| **v < 0.0)
        {
            return Err(ProfileError::NegativeSample { index, value });
        }
        let peak_mw = series.values().iter().cloned().fold(0.0, f64::max);
        let annual_energy_mwh = series.energy_mwh();
        Ok(Self {
            series,
            peak_mw,
            annual_energy_mwh,
        })
    }

    pub fn series(&self) -> &TimeSeries {
        &self.series
    }

    pub fn peak_mw(&self) -> f64 {
        self.peak_mw
    }

    pub fn annual_energy_mwh(&self) -> f64 {
        self.annual_energy_mwh
    }

    /// Multiplies every sample by `target_peak / peak` so the resulting peak
    /// equals `target_peak` exactly.
    pub fn scale_to_peak(&self, target_peak_mw: f64) -> Result<LoadProfile, ProfileError> {
        if self.peak_mw <= 0.0 {
            return Err(ProfileError::ZeroPeak);
        }
        if target_peak_mw <= 0.0 {
            return Err(ProfileError::ZeroPeak);
        }
        let factor = target_peak_mw / self.peak_mw;
        let values = self
            .series
            .values()
            .iter()
            .map(|v| {
                // Pin the maximum exactly; scaled non-peak samples stay below it.
                if *v == self.peak_mw {
                    target_peak_mw
                } else {
                    v * factor
                }
            })
            .collect();
        let series = TimeSeries::new(self.series.start_time(), self.series.dt_hours(), values)?;
        LoadProfile::new(series)
    }
}

/// Per-unit PV generation: MW of output per MW_p of nominal capacity.
/// Samples are dimensionless in [0, 1.2]; values slightly above 1 tolerate
/// above-standard-conditions irradiance.
#[derive(Debug, Clone)]
pub struct PvUnitProfile {
    series: TimeSeries,
    unit_annual_energy_mwh: f64,
}

pub const PV_UNIT_CEILING: f64 = 1.2;

impl PvUnitProfile {
    pub fn new(series: TimeSeries) -> Result<Self, ProfileError> {
        for (index, &value) in series.values().iter().enumerate() {
            if value < 0.0 {
                return Err(ProfileError::NegativeSample { index, value });
            }
            if value > PV_UNIT_CEILING {
                return Err(ProfileError::AboveUnitCeiling {
                    index,
                    value,
                    limit: PV_UNIT_CEILING,
                });
            }
        }
        let unit_annual_energy_mwh = series.energy_mwh();
        Ok(Self {
            series,
            unit_annual_energy_mwh,
        })
    }

    pub fn series(&self) -> &TimeSeries {
        &self.series
    }

    /// Annual yield in MWh per MW_p of installed capacity.
    pub fn unit_annual_energy_mwh(&self) -> f64 {
        self.unit_annual_energy_mwh
    }
}

/// PV plant size as a percentage of the community peak load ("capacity size":
/// 100 % equals the peak load in MW_p).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PvSize {
    pub capacity_pct: f64,
    pub nominal_mw: f64,
}

impl PvSize {
    pub fn from_pct(capacity_pct: f64, community_peak_mw: f64) -> Self {
        assert!(capacity_pct >= 0.0, "PV size must be non-negative");
        Self {
            capacity_pct,
            nominal_mw: community_peak_mw * capacity_pct / 100.0,
        }
    }
}

impl fmt::Display for PvSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}% ({:.3} MW_p)", self.capacity_pct, self.nominal_mw)
    }
}

/// Scales the per-unit profile to a concrete plant size, in MW.
pub fn pv_generation(unit: &PvUnitProfile, size: PvSize) -> TimeSeries {
    let values = unit
        .series()
        .values()
        .iter()
        .map(|v| v * size.nominal_mw)
        .collect();
    TimeSeries::new(unit.series().start_time(), unit.series().dt_hours(), values)
        .expect("scaling a valid per-unit profile preserves validity")
}

/// The PV size (as percent of peak load) at which annual PV generation equals
/// annual demand: the "100 % energy size" expressed on the capacity scale.
pub fn energy_size_pct(load: &LoadProfile, unit: &PvUnitProfile) -> Result<f64, ProfileError> {
    if unit.unit_annual_energy_mwh() <= 0.0 {
        return Err(ProfileError::ZeroYield);
    }
    if load.peak_mw() <= 0.0 {
        return Err(ProfileError::ZeroPeak);
    }
    let nominal_for_demand = load.annual_energy_mwh() / unit.unit_annual_energy_mwh();
    Ok(100.0 * nominal_for_demand / load.peak_mw())
}

/// Net load split into its positive part (residual load) and the magnitude of
/// its negative part (surplus generation). At most one of the two is nonzero
/// at any step and `rl - sg` reconstructs `load - pv`.
#[derive(Debug, Clone)]
pub struct NetLoadDecomposition {
    rl: TimeSeries,
    sg: TimeSeries,
}

impl NetLoadDecomposition {
    /// Builds the decomposition from aligned load and PV series.
    pub fn decompose(load: &TimeSeries, pv: &TimeSeries) -> Result<Self, ProfileError> {
        if !load.aligned_with(pv) {
            return Err(ProfileError::MisalignedSeries {
                detail: format!(
                    "load (start {}, dt {}, len {}) vs pv (start {}, dt {}, len {})",
                    load.start_time(),
                    load.dt_hours(),
                    load.len(),
                    pv.start_time(),
                    pv.dt_hours(),
                    pv.len()
                ),
            });
        }
        let rl: Vec<f64> = load
            .values()
            .iter()
            .zip(pv.values())
            .map(|(l, p)| (l - p).max(0.0))
            .collect();
        let sg: Vec<f64> = load
            .values()
            .iter()
            .zip(pv.values())
            .map(|(l, p)| (p - l).max(0.0))
            .collect();
        let rl = TimeSeries::new(load.start_time(), load.dt_hours(), rl)?;
        let sg = TimeSeries::new(load.start_time(), load.dt_hours(), sg)?;
        Ok(Self { rl, sg })
    }

    /// Builds from precomputed residual-load and surplus series. Both must be
    /// aligned, non-negative, and complementary (at most one nonzero per step).
    pub fn from_parts(rl: TimeSeries, sg: TimeSeries) -> Result<Self, ProfileError> {
        if !rl.aligned_with(&sg) {
            return Err(ProfileError::MisalignedSeries {
                detail: "rl and sg differ in start, interval or length".to_string(),
            });
        }
        for (index, (&r, &s)) in rl.values().iter().zip(sg.values()).enumerate() {
            if r < 0.0 {
                return Err(ProfileError::NegativeSample { index, value: r });
            }
            if s < 0.0 {
                return Err(ProfileError::NegativeSample { index, value: s });
            }
            if r.min(s) > 1e-9 {
                return Err(ProfileError::MisalignedSeries {
                    detail: format!("step {index}: rl {r} and sg {s} are both nonzero"),
                });
            }
        }
        Ok(Self { rl, sg })
    }

    pub fn rl(&self) -> &TimeSeries {
        &self.rl
    }

    pub fn sg(&self) -> &TimeSeries {
        &self.sg
    }

    pub fn len(&self) -> usize {
        self.rl.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rl.is_empty()
    }

    pub fn dt_hours(&self) -> f64 {
        self.rl.dt_hours()
    }

    /// Net load at step `t` (positive = residual load, negative = surplus).
    pub fn net(&self, t: usize) -> f64 {
        self.rl.values()[t] - self.sg.values()[t]
    }

    /// Returns a copy with the surplus series clipped at `cap_mw`, the
    /// decomposition seen by the grid under a static feed-in limit.
    pub fn with_sg_capped(&self, cap_mw: f64) -> NetLoadDecomposition {
        let sg = self
            .sg
            .values()
            .iter()
            .map(|v| v.min(cap_mw))
            .collect::<Vec<_>>();
        let sg = TimeSeries::new(self.sg.start_time(), self.sg.dt_hours(), sg)
            .expect("capping preserves validity");
        NetLoadDecomposition {
            rl: self.rl.clone(),
            sg,
        }
    }
}
