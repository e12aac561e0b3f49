use chrono::{DateTime, Duration, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{GridError, IngestError, TimeGrid};

pub const CSV_HEADER: &str = "timestamp,actual_gco2_per_kwh,forecast_gco2_per_kwh";
const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%MZ";

/// Region id used for the national (GB-wide) signal.
pub const NATIONAL_REGION_ID: u16 = 0;

/// Half-hourly carbon intensity (gCO2e/kWh) for one region: measured values
/// plus, when available, the published one-step-ahead forecast.
///
/// Construction validates the series, so every instance is gap-free,
/// finite and non-negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarbonSeries {
    region_id: u16,
    region_name: String,
    start: DateTime<Utc>,
    step_minutes: i64,
    actual: Vec<f64>,
    one_step_forecast: Option<Vec<f64>>,
}

impl CarbonSeries {
    pub fn new(
        region_id: u16,
        region_name: impl Into<String>,
        start: DateTime<Utc>,
        actual: Vec<f64>,
        one_step_forecast: Option<Vec<f64>>,
    ) -> Result<Self, GridError> {
        Self::with_grid(
            region_id,
            region_name,
            TimeGrid::half_hourly(start)?,
            actual,
            one_step_forecast,
        )
    }

    pub fn with_grid(
        region_id: u16,
        region_name: impl Into<String>,
        grid: TimeGrid,
        actual: Vec<f64>,
        one_step_forecast: Option<Vec<f64>>,
    ) -> Result<Self, GridError> {
        if actual.is_empty() {
            return Err(GridError::EmptySeries);
        }
        for (i, &v) in actual.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(GridError::InvalidIntensity { index: i, value: v });
            }
        }
        if let Some(f) = &one_step_forecast {
            if f.len() != actual.len() {
                return Err(GridError::ForecastLength {
                    actual: actual.len(),
                    forecast: f.len(),
                });
            }
            for (i, &v) in f.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(GridError::InvalidIntensity { index: i, value: v });
                }
            }
        }
        Ok(Self {
            region_id,
            region_name: region_name.into(),
            start: grid.datum(),
            step_minutes: grid.step_minutes(),
            actual,
            one_step_forecast,
        })
    }

    pub fn region_id(&self) -> u16 {
        self.region_id
    }

    pub fn region_name(&self) -> &str {
        &self.region_name
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.start
    }

    /// Exclusive end of the covered span.
    pub fn end(&self) -> DateTime<Utc> {
        self.timestamp(self.len())
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid::new((1440 / self.step_minutes) as usize, self.start).expect("validated at construction")
    }

    pub fn delta_t_hours(&self) -> f64 {
        self.step_minutes as f64 / 60.0
    }

    pub fn len(&self) -> usize {
        self.actual.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actual.is_empty()
    }

    pub fn actual(&self) -> &[f64] {
        &self.actual
    }

    pub fn one_step_forecast(&self) -> Option<&[f64]> {
        self.one_step_forecast.as_deref()
    }

    pub fn timestamp(&self, index: usize) -> DateTime<Utc> {
        self.start + Duration::minutes(self.step_minutes * index as i64)
    }

    /// Index of the interval starting at `ts`, possibly outside `0..len`.
    pub fn offset_of(&self, ts: DateTime<Utc>) -> Option<i64> {
        self.grid().index_of(ts)
    }

    pub fn mean_actual(&self) -> f64 {
        self.actual.iter().sum::<f64>() / self.len() as f64
    }

    /// Copy of the samples with start in `[from, to)`.
    pub fn slice(&self, from: DateTime<Utc>, to: DateTime<Utc>) -> Result<Self, GridError> {
        let a = self.offset_of(from).ok_or(GridError::Misaligned(from))?;
        let b = self.offset_of(to).ok_or(GridError::Misaligned(to))?;
        if a < 0 || b > self.len() as i64 || a >= b {
            return Err(GridError::OutOfCoverage { from, to });
        }
        let (a, b) = (a as usize, b as usize);
        Self::with_grid(
            self.region_id,
            self.region_name.clone(),
            TimeGrid::new((1440 / self.step_minutes) as usize, from)?,
            self.actual[a..b].to_vec(),
            self.one_step_forecast.as_ref().map(|f| f[a..b].to_vec()),
        )
    }

    /// Canonical CSV text.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 40);
        match &self.one_step_forecast {
            Some(_) => out.push_str(CSV_HEADER),
            None => out.push_str("timestamp,actual_gco2_per_kwh"),
        }
        out.push('\n');
        for (i, a) in self.actual.iter().enumerate() {
            let ts = self.timestamp(i).format(TIMESTAMP_FORMAT);
            match &self.one_step_forecast {
                Some(f) => out.push_str(&format!("{ts},{a},{}\n", f[i])),
                None => out.push_str(&format!("{ts},{a}\n")),
            }
        }
        out
    }

    /// Hex SHA-256 of the canonical CSV, used to tag reports with their input.
    pub fn data_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_csv().as_bytes()))
    }
}

/// How ingestion treats missing half-hours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapFill {
    #[default]
    Reject,
    /// Linear interpolation across gaps of at most `max_missing` intervals.
    Linear { max_missing: usize },
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub region_id: u16,
    pub region_name: String,
    pub intervals_per_day: usize,
    pub fill: GapFill,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            region_id: NATIONAL_REGION_ID,
            region_name: "national".to_owned(),
            intervals_per_day: TimeGrid::HALF_HOURLY,
            fill: GapFill::Reject,
        }
    }
}

pub(crate) fn format_timestamp(ts: DateTime<Utc>) -> String {
    ts.format(TIMESTAMP_FORMAT).to_string()
}

pub(crate) fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    if let Ok(naive) = NaiveDateTime::parse_from_str(raw, TIMESTAMP_FORMAT) {
        return Some(naive.and_utc());
    }
    if !raw.ends_with('Z') {
        return None;
    }
    DateTime::parse_from_rfc3339(raw).ok().map(|d| d.with_timezone(&Utc))
}

/// One observation keyed by time, as delivered by the CSV reader or the API client.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Sample {
    pub timestamp: DateTime<Utc>,
    pub actual: f64,
    pub forecast: Option<f64>,
}

/// Parse canonical CSV into a validated series. Rows may arrive unsorted.
pub fn parse_carbon_csv(bytes: &[u8], options: &IngestOptions) -> Result<CarbonSeries, IngestError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let headers = reader
        .headers()
        .map_err(|e| IngestError::Header(e.to_string()))?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let ts_col = column("timestamp").ok_or_else(|| IngestError::Header("missing `timestamp`".into()))?;
    let actual_col =
        column("actual_gco2_per_kwh").ok_or_else(|| IngestError::Header("missing `actual_gco2_per_kwh`".into()))?;
    let forecast_col = column("forecast_gco2_per_kwh");

    let mut samples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        // header is line 1
        let line = row + 2;
        let record = record.map_err(|e| IngestError::MalformedRow {
            line,
            reason: e.to_string(),
        })?;
        let field = |col: usize| record.get(col).unwrap_or("");
        let timestamp = parse_timestamp(field(ts_col)).ok_or_else(|| IngestError::MalformedRow {
            line,
            reason: format!("bad timestamp `{}`", field(ts_col)),
        })?;
        let number = |col: usize, what: &str| -> Result<f64, IngestError> {
            let raw = field(col);
            let v: f64 = raw.parse().map_err(|_| IngestError::MalformedRow {
                line,
                reason: format!("bad {what} `{raw}`"),
            })?;
            if !v.is_finite() {
                return Err(IngestError::MalformedRow {
                    line,
                    reason: format!("non-finite {what}"),
                });
            }
            if v < 0.0 {
                return Err(IngestError::NegativeIntensity { line, value: v });
            }
            Ok(v)
        };
        let actual = number(actual_col, "actual")?;
        let forecast = forecast_col.map(|c| number(c, "forecast")).transpose()?;
        samples.push(Sample {
            timestamp,
            actual,
            forecast,
        });
    }
    assemble(samples, options)
}

/// Sort, de-duplicate-check, gap-check (or fill) and validate raw samples.
pub(crate) fn assemble(mut samples: Vec<Sample>, options: &IngestOptions) -> Result<CarbonSeries, IngestError> {
    if samples.is_empty() {
        return Err(IngestError::Empty);
    }
    samples.sort_by_key(|s| s.timestamp);
    if let Some(w) = samples.windows(2).find(|w| w[0].timestamp == w[1].timestamp) {
        return Err(IngestError::DuplicateTimestamp(w[0].timestamp));
    }
    let grid = TimeGrid::new(options.intervals_per_day, samples[0].timestamp)?;
    let step = grid.step_minutes();
    let has_forecast = samples.iter().all(|s| s.forecast.is_some());

    let mut actual = Vec::with_capacity(samples.len());
    let mut forecast = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        if i > 0 {
            let prev = &samples[i - 1];
            let delta = (s.timestamp - prev.timestamp).num_minutes();
            if delta % step != 0 || (s.timestamp - prev.timestamp) != Duration::minutes(delta) {
                return Err(GridError::Misaligned(s.timestamp).into());
            }
            let missing = (delta / step - 1) as usize;
            if missing > 0 {
                match options.fill {
                    GapFill::Linear { max_missing } if missing <= max_missing => {
                        for j in 1..=missing {
                            let w = j as f64 / (missing + 1) as f64;
                            actual.push(prev.actual + w * (s.actual - prev.actual));
                            if has_forecast {
                                let (fp, fs) = (prev.forecast.unwrap(), s.forecast.unwrap());
                                forecast.push(fp + w * (fs - fp));
                            }
                        }
                    }
                    _ => {
                        return Err(IngestError::Gap {
                            missing: prev.timestamp + Duration::minutes(step),
                            count: missing,
                        })
                    }
                }
            }
        }
        actual.push(s.actual);
        if has_forecast {
            forecast.push(s.forecast.unwrap());
        }
    }
    Ok(CarbonSeries::with_grid(
        options.region_id,
        options.region_name.clone(),
        grid,
        actual,
        has_forecast.then_some(forecast),
    )?)
}
