//! Client for the public GB carbon-intensity web API.
//!
//! National endpoint: `GET {base}/intensity/{from}/{to}` returns
//! `{"data":[{"from","to","intensity":{"forecast","actual","index"}}]}`.
//! Regional endpoint: `GET {base}/regional/intensity/{from}/{to}/regionid/{id}`
//! returns `{"data":{"regionid","shortname","data":[{"from","to","intensity":{"forecast","index"}}]}}`.
//!
//! The API caps each request at 14 days, so ranges are split into chunks that
//! are fetched concurrently and merged by timestamp. Raw response bodies are
//! cached on disk when a cache directory is configured.

use std::path::{Path, PathBuf};
use std::time::Duration as StdDuration;

use chrono::{DateTime, Duration, Utc};
use serde_json::Value;

use super::series::{assemble, format_timestamp, parse_timestamp, IngestOptions, Sample};
use super::{CarbonSeries, FetchError, RegionRegistry, NATIONAL_REGION_ID};

pub const DEFAULT_BASE_URL: &str = "https://api.carbonintensity.org.uk";
pub const CACHE_DIR_ENV: &str = "CARBON_SCHED_CACHE_DIR";
const MAX_CHUNK_DAYS: i64 = 13;
const MAX_PARALLEL_REQUESTS: usize = 4;

/// Which signal to request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionSelector {
    National,
    Regional(u16),
}

impl RegionSelector {
    pub fn parse(raw: &str) -> Result<Self, FetchError> {
        if raw.eq_ignore_ascii_case("national") {
            return Ok(Self::National);
        }
        raw.parse::<u16>()
            .ok()
            .filter(|&id| id != NATIONAL_REGION_ID)
            .map(Self::Regional)
            .ok_or_else(|| FetchError::UnknownRegion(raw.to_owned()))
    }

    fn cache_key(&self) -> String {
        match self {
            Self::National => "national".to_owned(),
            Self::Regional(id) => format!("region{id}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CarbonApiClient {
    base_url: String,
    cache_dir: Option<PathBuf>,
    registry: RegionRegistry,
    chunk_days: i64,
    timeout: StdDuration,
}

impl Default for CarbonApiClient {
    fn default() -> Self {
        Self::new(DEFAULT_BASE_URL)
    }
}

impl CarbonApiClient {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into().trim_end_matches('/').to_owned(),
            cache_dir: std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from),
            registry: RegionRegistry::default(),
            chunk_days: MAX_CHUNK_DAYS,
            timeout: StdDuration::from_secs(60),
        }
    }

    pub fn with_cache_dir(mut self, dir: Option<PathBuf>) -> Self {
        if dir.is_some() {
            self.cache_dir = dir;
        }
        self
    }

    pub fn without_cache(mut self) -> Self {
        self.cache_dir = None;
        self
    }

    pub fn with_registry(mut self, registry: RegionRegistry) -> Self {
        self.registry = registry;
        self
    }

    pub fn with_chunk_days(mut self, days: i64) -> Self {
        self.chunk_days = days.clamp(1, MAX_CHUNK_DAYS);
        self
    }

    pub fn cache_dir(&self) -> Option<&Path> {
        self.cache_dir.as_deref()
    }

    /// Gap-validated series covering `[from, to)`.
    pub fn fetch_region(
        &self,
        region: RegionSelector,
        from: DateTime<Utc>,
        to: DateTime<Utc>,
    ) -> Result<CarbonSeries, FetchError> {
        if to <= from {
            return Err(FetchError::EmptyRange { from, to });
        }
        let (region_id, region_name) = match region {
            RegionSelector::National => (NATIONAL_REGION_ID, "national".to_owned()),
            RegionSelector::Regional(id) => {
                let r = self
                    .registry
                    .get(id)
                    .ok_or_else(|| FetchError::UnknownRegion(id.to_string()))?;
                (id, r.name.clone())
            }
        };

        let mut chunks = Vec::new();
        let mut cursor = from;
        while cursor < to {
            let end = (cursor + Duration::days(self.chunk_days)).min(to);
            chunks.push((cursor, end));
            cursor = end;
        }

        let mut results: Vec<Result<Vec<Sample>, FetchError>> = Vec::with_capacity(chunks.len());
        for batch in chunks.chunks(MAX_PARALLEL_REQUESTS) {
            let batch_results: Vec<_> = std::thread::scope(|scope| {
                let handles: Vec<_> = batch
                    .iter()
                    .map(|&(a, b)| scope.spawn(move || self.fetch_chunk(region, a, b)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("fetch thread panicked"))
                    .collect()
            });
            results.extend(batch_results);
        }
        let mut samples = Vec::new();
        for r in results {
            samples.extend(r?);
        }
        let options = IngestOptions {
            region_id,
            region_name,
            ..IngestOptions::default()
        };
        let series = assemble(samples, &options)?;
        if series.start() != from || series.end() != to {
            let missing = if series.start() != from { from } else { series.end() };
            return Err(FetchError::Ingest(super::IngestError::Gap { missing, count: 1 }));
        }
        Ok(series)
    }

    fn url(&self, region: RegionSelector, from: DateTime<Utc>, to: DateTime<Utc>) -> String {
        let (a, b) = (format_timestamp(from), format_timestamp(to));
        match region {
            RegionSelector::National => format!("{}/intensity/{a}/{b}", self.base_url),
            RegionSelector::Regional(id) => format!("{}/regional/intensity/{a}/{b}/regionid/{id}", self.base_url),
        }
    }

    fn fetch_chunk(
        &self,
        region: RegionSelector,
        from: DateTime<Utc>,
        to: DateTime<Utc>,
    ) -> Result<Vec<Sample>, FetchError> {
        // padded by one interval on both sides; the endpoint's boundary handling is not documented precisely
        let (req_from, req_to) = (from - Duration::minutes(30), to + Duration::minutes(30));
        let cache_file = self.cache_dir.as_ref().map(|dir| {
            dir.join(format!(
                "{}_{}_{}.json",
                region.cache_key(),
                format_timestamp(req_from).replace(':', ""),
                format_timestamp(req_to).replace(':', "")
            ))
        });
        let body = match cache_file.as_ref().filter(|p| p.exists()) {
            Some(path) => std::fs::read_to_string(path).map_err(|e| FetchError::Cache(e.to_string()))?,
            None => {
                let body = self.get(&self.url(region, req_from, req_to))?;
                if let Some(path) = &cache_file {
                    std::fs::create_dir_all(path.parent().unwrap()).map_err(|e| FetchError::Cache(e.to_string()))?;
                    std::fs::write(path, &body).map_err(|e| FetchError::Cache(e.to_string()))?;
                }
                body
            }
        };
        let samples = match region {
            RegionSelector::National => parse_national_payload(&body)?,
            RegionSelector::Regional(_) => parse_regional_payload(&body)?,
        };
        Ok(samples
            .into_iter()
            .filter(|s| s.timestamp >= from && s.timestamp < to)
            .collect())
    }

    fn get(&self, url: &str) -> Result<String, FetchError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .build()
            .into();
        let mut response = agent
            .get(url)
            .header("Accept", "application/json")
            .call()
            .map_err(|e| FetchError::Http(format!("{url}: {e}")))?;
        response
            .body_mut()
            .read_to_string()
            .map_err(|e| FetchError::Http(format!("{url}: {e}")))
    }
}

fn drift(reason: impl Into<String>) -> FetchError {
    FetchError::SchemaDrift {
        timestamp: None,
        reason: reason.into(),
    }
}

fn period_start(entry: &Value) -> Result<DateTime<Utc>, FetchError> {
    let raw = entry
        .get("from")
        .and_then(Value::as_str)
        .ok_or_else(|| drift("period without `from`"))?;
    parse_timestamp(raw).ok_or_else(|| drift(format!("unparseable `from` timestamp `{raw}`")))
}

fn intensity_field(entry: &Value, ts: DateTime<Utc>, field: &str) -> Result<f64, FetchError> {
    let value = entry
        .get("intensity")
        .and_then(|i| i.get(field))
        .ok_or_else(|| FetchError::SchemaDrift {
            timestamp: Some(ts),
            reason: format!("missing intensity.{field}"),
        })?;
    value.as_f64().ok_or_else(|| FetchError::SchemaDrift {
        timestamp: Some(ts),
        reason: format!("intensity.{field} is {value}"),
    })
}

/// Normalize a national payload into samples (actual + one-step forecast).
pub(crate) fn parse_national_payload(body: &str) -> Result<Vec<Sample>, FetchError> {
    let root: Value = serde_json::from_str(body).map_err(|e| drift(format!("invalid JSON: {e}")))?;
    let data = root
        .get("data")
        .and_then(Value::as_array)
        .ok_or_else(|| drift("`data` is not an array"))?;
    data.iter()
        .map(|entry| {
            let ts = period_start(entry)?;
            Ok(Sample {
                timestamp: ts,
                actual: intensity_field(entry, ts, "actual")?,
                forecast: Some(intensity_field(entry, ts, "forecast")?),
            })
        })
        .collect()
}

/// Normalize a single-region payload. The regional API only publishes its
/// forecast, which becomes the intensity signal.
pub(crate) fn parse_regional_payload(body: &str) -> Result<Vec<Sample>, FetchError> {
    let root: Value = serde_json::from_str(body).map_err(|e| drift(format!("invalid JSON: {e}")))?;
    let region = match root.get("data") {
        Some(Value::Object(_)) => &root["data"],
        Some(Value::Array(items)) if items.len() == 1 => &items[0],
        _ => return Err(drift("`data` is neither a region object nor a one-element array")),
    };
    let data = region
        .get("data")
        .and_then(Value::as_array)
        .ok_or_else(|| drift("region `data` is not an array"))?;
    data.iter()
        .map(|entry| {
            let ts = period_start(entry)?;
            Ok(Sample {
                timestamp: ts,
                actual: intensity_field(entry, ts, "forecast")?,
                forecast: None,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn national_payload_normalizes() {
        let body = r#"{"data":[
            {"from":"2022-01-01T00:00Z","to":"2022-01-01T00:30Z","intensity":{"forecast":190,"actual":183,"index":"moderate"}},
            {"from":"2022-01-01T00:30Z","to":"2022-01-01T01:00Z","intensity":{"forecast":188,"actual":181,"index":"moderate"}}
        ]}"#;
        let samples = parse_national_payload(body).unwrap();
        assert_eq!(samples.len(), 2);
        assert_eq!(samples[0].actual, 183.0);
        assert_eq!(samples[1].forecast, Some(188.0));
    }

    #[test]
    fn null_actual_is_schema_drift_with_timestamp() {
        let body = r#"{"data":[{"from":"2022-01-01T00:30Z","to":"2022-01-01T01:00Z","intensity":{"forecast":188,"actual":null}}]}"#;
        match parse_national_payload(body).unwrap_err() {
            FetchError::SchemaDrift {
                timestamp: Some(ts), ..
            } => assert_eq!(format_timestamp(ts), "2022-01-01T00:30Z"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unexpected_shape_is_schema_drift() {
        assert!(matches!(
            parse_national_payload(r#"{"error":"x"}"#),
            Err(FetchError::SchemaDrift { .. })
        ));
        assert!(matches!(
            parse_regional_payload(r#"{"data":[]}"#),
            Err(FetchError::SchemaDrift { .. })
        ));
    }

    #[test]
    fn regional_payload_uses_forecast_as_signal() {
        let body = r#"{"data":{"regionid":13,"dnoregion":"UKPN London","shortname":"London","data":[
            {"from":"2023-01-01T00:00Z","to":"2023-01-01T00:30Z","intensity":{"forecast":120,"index":"low"},"generationmix":[]}
        ]}}"#;
        let samples = parse_regional_payload(body).unwrap();
        assert_eq!(samples[0].actual, 120.0);
        assert_eq!(samples[0].forecast, None);
    }

    #[test]
    fn selector_parsing() {
        assert_eq!(RegionSelector::parse("national").unwrap(), RegionSelector::National);
        assert_eq!(RegionSelector::parse("13").unwrap(), RegionSelector::Regional(13));
        assert!(RegionSelector::parse("0").is_err());
        assert!(RegionSelector::parse("x").is_err());
    }

    #[test]
    fn reversed_range_rejected_before_network() {
        let client = CarbonApiClient::new("http://127.0.0.1:9").without_cache();
        let t = parse_timestamp("2022-01-02T00:00Z").unwrap();
        assert!(matches!(
            client.fetch_region(RegionSelector::National, t, t),
            Err(FetchError::EmptyRange { .. })
        ));
    }
}
