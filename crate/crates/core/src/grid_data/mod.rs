//! Time-grid arithmetic and carbon-intensity ingestion.

mod api;
mod regions;
mod series;
mod time_grid;

use chrono::{DateTime, Utc};
use thiserror::Error;

pub use api::{CarbonApiClient, RegionSelector, CACHE_DIR_ENV, DEFAULT_BASE_URL};
pub use regions::{Region, RegionRegistry};
pub use series::{parse_carbon_csv, CarbonSeries, GapFill, IngestOptions, CSV_HEADER, NATIONAL_REGION_ID};
pub use time_grid::{linear_to_session, session_to_linear, SessionIndex, TimeGrid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("interval index {0} out of range (must be >= 1)")]
    IndexOutOfRange(usize),
    #[error("session index (day {0}, slot {1}) out of range")]
    SessionOutOfRange(usize, usize),
    #[error("{0} intervals per day does not divide a day into whole minutes")]
    IntervalsPerDay(usize),
    #[error("timestamp {0} is not aligned to the interval grid")]
    Misaligned(DateTime<Utc>),
    #[error("series is empty")]
    EmptySeries,
    #[error("intensity at index {index} is {value}; must be finite and non-negative")]
    InvalidIntensity { index: usize, value: f64 },
    #[error("forecast length {forecast} differs from actual length {actual}")]
    ForecastLength { actual: usize, forecast: usize },
    #[error("range {from}..{to} not covered by the series")]
    OutOfCoverage { from: DateTime<Utc>, to: DateTime<Utc> },
    #[error("region registry: {0}")]
    Registry(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("bad header: {0}")]
    Header(String),
    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: negative intensity {value}")]
    NegativeIntensity { line: usize, value: f64 },
    #[error("duplicate timestamp {0}")]
    DuplicateTimestamp(DateTime<Utc>),
    #[error("gap: {count} interval(s) missing starting at {missing}")]
    Gap { missing: DateTime<Utc>, count: usize },
    #[error("no data rows")]
    Empty,
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FetchError {
    #[error("http: {0}")]
    Http(String),
    #[error("unexpected payload{}: {reason}", timestamp.map(|t| format!(" at {t}")).unwrap_or_default())]
    SchemaDrift {
        timestamp: Option<DateTime<Utc>>,
        reason: String,
    },
    #[error("empty request range {from}..{to}")]
    EmptyRange { from: DateTime<Utc>, to: DateTime<Utc> },
    #[error("unknown region `{0}`")]
    UnknownRegion(String),
    #[error("cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}
