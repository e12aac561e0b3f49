//! Synthetic long-range carbon-intensity forecasts.
//!
//! A forecast made at datum `d` for the interval `l` steps ahead is the
//! measured intensity scaled by a signed relative error whose magnitude is the
//! stored one-step error grown linearly with the lead time:
//!
//! ```text
//! value[l] = actual[l] * (1 + a[l] * |e1| * (1 + lambda * (l - 1)))
//! ```
//!
//! with `a[l]` a fair +/-1 sign drawn from a stream keyed by `(seed, d)`.

use chrono::{DateTime, Utc};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid_data::CarbonSeries;
use crate::rng::{keyed_stream, DOMAIN_FORECAST_SIGNS};

/// Per-interval MAPE growth rate transferred from published multi-day forecast statistics.
pub const DEFAULT_LAMBDA: f64 = 9.97e-3;
pub const DEFAULT_FALLBACK_REL_ERROR: f64 = 0.02;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForecastError {
    #[error("actual intensity is zero; relative error undefined")]
    ZeroActual,
    #[error("window {start}..{end} exceeds series length {len}")]
    Range { start: usize, end: usize, len: usize },
    #[error("invalid forecast model: {0}")]
    InvalidModel(String),
}

/// Source of the one-step error magnitude `|e1|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpsMode {
    /// One magnitude for the whole window, taken at its first interval.
    Scalar,
    /// Each interval uses the stored one-step error at that interval.
    #[default]
    PerInterval,
}

impl std::str::FromStr for EpsMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "scalar" => Ok(Self::Scalar),
            "per-interval" => Ok(Self::PerInterval),
            other => Err(format!("unknown eps mode `{other}` (expected scalar|per-interval)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecastModel {
    pub lambda: f64,
    pub sign_seed: u64,
    pub fallback_rel_error: f64,
    pub eps_mode: EpsMode,
}

impl Default for ForecastModel {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            sign_seed: 0,
            fallback_rel_error: DEFAULT_FALLBACK_REL_ERROR,
            eps_mode: EpsMode::PerInterval,
        }
    }
}

impl ForecastModel {
    pub fn validate(&self) -> Result<(), ForecastError> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(ForecastError::InvalidModel(format!(
                "lambda {} must be >= 0",
                self.lambda
            )));
        }
        if !(self.fallback_rel_error >= 0.0 && self.fallback_rel_error.is_finite()) {
            return Err(ForecastError::InvalidModel(format!(
                "fallback relative error {} must be >= 0",
                self.fallback_rel_error
            )));
        }
        Ok(())
    }

    /// Signs `a[1..=horizon]` for the window starting at `datum_index`.
    /// The sign at offset `l` depends only on `(sign_seed, datum_index, l)`.
    pub fn signs(&self, datum_index: usize) -> impl Iterator<Item = f64> {
        let mut rng = keyed_stream(self.sign_seed, DOMAIN_FORECAST_SIGNS, datum_index as u64);
        std::iter::repeat_with(move || if rng.random::<bool>() { 1.0 } else { -1.0 })
    }
}

/// Relative error of a forecast against the measured value.
pub fn one_step_rel_error(actual: f64, forecast1: f64) -> Result<f64, ForecastError> {
    if actual == 0.0 {
        return Err(ForecastError::ZeroActual);
    }
    Ok((forecast1 - actual) / actual)
}

/// Error magnitude at lead `l` (1-based) under linear MAPE growth.
pub fn scale_error_magnitude(eps1_abs: f64, l: usize, lambda: f64) -> f64 {
    eps1_abs * (1.0 + lambda * (l as f64 - 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticForecast {
    pub datum: DateTime<Utc>,
    pub values: Vec<f64>,
    pub rel_errors: Vec<f64>,
}

fn stored_one_step_abs(series: &CarbonSeries, index: usize, fallback: f64) -> f64 {
    series
        .one_step_forecast()
        .and_then(|f| one_step_rel_error(series.actual()[index], f[index]).ok())
        .map_or(fallback, f64::abs)
}

/// Forecast for the `horizon` intervals starting at zero-based `datum_index`
/// (lead 1 is the sample at `datum_index`).
pub fn synthesize(
    series: &CarbonSeries,
    datum_index: usize,
    horizon: usize,
    model: &ForecastModel,
) -> Result<SyntheticForecast, ForecastError> {
    model.validate()?;
    let end = datum_index + horizon;
    if end > series.len() {
        return Err(ForecastError::Range {
            start: datum_index,
            end,
            len: series.len(),
        });
    }
    let actual = &series.actual()[datum_index..end];
    let scalar_eps = (model.eps_mode == EpsMode::Scalar && horizon > 0)
        .then(|| stored_one_step_abs(series, datum_index, model.fallback_rel_error));

    let mut values = Vec::with_capacity(horizon);
    let mut rel_errors = Vec::with_capacity(horizon);
    for ((offset, &c), sign) in actual.iter().enumerate().zip(model.signs(datum_index)) {
        let eps1 =
            scalar_eps.unwrap_or_else(|| stored_one_step_abs(series, datum_index + offset, model.fallback_rel_error));
        let mut rel = sign * scale_error_magnitude(eps1, offset + 1, model.lambda);
        // intensities are physically non-negative
        if rel < -1.0 {
            rel = -1.0;
        }
        rel_errors.push(rel);
        values.push(c * (1.0 + rel));
    }
    Ok(SyntheticForecast {
        datum: series.timestamp(datum_index),
        values,
        rel_errors,
    })
}

/// Measured values over the window, for perfect-forecast runs.
pub fn perfect(series: &CarbonSeries, datum_index: usize, horizon: usize) -> Result<SyntheticForecast, ForecastError> {
    let end = datum_index + horizon;
    if end > series.len() {
        return Err(ForecastError::Range {
            start: datum_index,
            end,
            len: series.len(),
        });
    }
    Ok(SyntheticForecast {
        datum: series.timestamp(datum_index),
        values: series.actual()[datum_index..end].to_vec(),
        rel_errors: vec![0.0; horizon],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn series(actual: Vec<f64>, forecast: Option<Vec<f64>>) -> CarbonSeries {
        CarbonSeries::new(
            0,
            "t",
            Utc.with_ymd_and_hms(2022, 1, 1, 0, 0, 0).unwrap(),
            actual,
            forecast,
        )
        .unwrap()
    }

    /// First datum whose lead-1 sign is `want`.
    fn datum_with_first_sign(model: &ForecastModel, want: f64) -> usize {
        (0..).find(|&d| model.signs(d).next().unwrap() == want).unwrap()
    }

    #[test]
    fn one_step_error_examples() {
        assert!((one_step_rel_error(200.0, 210.0).unwrap() - 0.05).abs() < 1e-15);
        assert_eq!(one_step_rel_error(200.0, 200.0).unwrap(), 0.0);
        assert_eq!(one_step_rel_error(0.0, 10.0), Err(ForecastError::ZeroActual));
    }

    #[test]
    fn magnitude_scaling_examples() {
        assert_eq!(scale_error_magnitude(0.05, 1, DEFAULT_LAMBDA), 0.05);
        assert!((scale_error_magnitude(0.05, 97, 9.97e-3) - 0.097856).abs() < 1e-12);
        assert_eq!(scale_error_magnitude(0.0, 300, DEFAULT_LAMBDA), 0.0);
    }

    #[test]
    fn positive_sign_at_lead_one_reproduces_one_step_forecast() {
        let model = ForecastModel::default();
        let d = datum_with_first_sign(&model, 1.0);
        let mut a = vec![200.0; d + 1];
        let mut f = vec![200.0; d + 1];
        f[d] = 210.0;
        a[d] = 200.0;
        let fc = synthesize(&series(a, Some(f)), d, 1, &model).unwrap();
        assert!((fc.values[0] - 210.0).abs() < 1e-9);
    }

    #[test]
    fn lead_97_value() {
        let model = ForecastModel {
            lambda: 9.97e-3,
            ..Default::default()
        };
        // find a datum whose 97th sign is positive
        let d = (0..).find(|&d| model.signs(d).nth(96).unwrap() == 1.0).unwrap();
        let n = d + 97;
        let s = series(vec![200.0; n], Some(vec![210.0; n]));
        let fc = synthesize(&s, d, 97, &model).unwrap();
        assert!((fc.values[96] - 219.5712).abs() < 1e-9);
    }

    #[test]
    fn zero_growth_positive_signs() {
        let model = ForecastModel {
            lambda: 0.0,
            ..Default::default()
        };
        let s = series(vec![100.0, 200.0, 300.0], Some(vec![110.0, 190.0, 300.0]));
        let fc = synthesize(&s, 0, 3, &model).unwrap();
        for ((v, a), (r, sign)) in fc
            .values
            .iter()
            .zip(s.actual())
            .zip(fc.rel_errors.iter().zip(model.signs(0)))
        {
            if sign > 0.0 {
                assert!((v - a * (1.0 + r.abs())).abs() < 1e-12);
            }
        }
        assert_eq!(fc.rel_errors[2].abs(), 0.0);
    }

    #[test]
    fn fallback_used_without_stored_forecast_and_for_zero_actual() {
        let model = ForecastModel {
            lambda: 0.0,
            fallback_rel_error: 0.1,
            ..Default::default()
        };
        let fc = synthesize(&series(vec![50.0; 4], None), 0, 4, &model).unwrap();
        assert!(fc.rel_errors.iter().all(|r| (r.abs() - 0.1).abs() < 1e-15));
        let fc = synthesize(&series(vec![0.0, 50.0], Some(vec![5.0, 50.0])), 0, 2, &model).unwrap();
        assert!((fc.rel_errors[0].abs() - 0.1).abs() < 1e-15);
        assert_eq!(fc.values[0], 0.0);
    }

    #[test]
    fn scalar_mode_reuses_first_interval_error() {
        let model = ForecastModel {
            lambda: 0.0,
            eps_mode: EpsMode::Scalar,
            ..Default::default()
        };
        let s = series(vec![100.0, 100.0, 100.0], Some(vec![105.0, 150.0, 100.0]));
        let fc = synthesize(&s, 0, 3, &model).unwrap();
        assert!(fc.rel_errors.iter().all(|r| (r.abs() - 0.05).abs() < 1e-12));
    }

    #[test]
    fn large_negative_errors_clamp_at_zero() {
        let model = ForecastModel {
            lambda: 1.0,
            ..Default::default()
        };
        let s = series(vec![10.0; 64], Some(vec![18.0; 64]));
        let fc = synthesize(&s, 0, 64, &model).unwrap();
        assert!(fc.values.iter().all(|v| *v >= 0.0));
        assert!(fc.rel_errors.iter().any(|r| *r == -1.0));
    }

    #[test]
    fn range_and_model_errors() {
        let s = series(vec![1.0; 10], None);
        assert!(matches!(
            synthesize(&s, 5, 6, &ForecastModel::default()),
            Err(ForecastError::Range { .. })
        ));
        let bad = ForecastModel {
            lambda: -0.1,
            ..Default::default()
        };
        assert!(matches!(
            synthesize(&s, 0, 1, &bad),
            Err(ForecastError::InvalidModel(_))
        ));
    }

    #[test]
    fn sign_stream_prefix_is_horizon_independent() {
        let model = ForecastModel {
            sign_seed: 42,
            ..Default::default()
        };
        let short: Vec<f64> = model.signs(17).take(10).collect();
        let long: Vec<f64> = model.signs(17).take(300).collect();
        assert_eq!(&long[..10], &short[..]);
        let other: Vec<f64> = model.signs(18).take(300).collect();
        assert_ne!(long, other);
    }

    proptest! {
        #[test]
        fn values_match_rel_errors_exactly(
            actual in prop::collection::vec(0.0f64..800.0, 1..120),
            noise in prop::collection::vec(-0.3f64..0.3, 120),
            seed in any::<u64>(),
            lambda in 0.0f64..0.05,
        ) {
            let n = actual.len();
            let fc: Vec<f64> = actual.iter().zip(&noise).map(|(a, e)| a * (1.0 + e)).collect();
            let s = series(actual, Some(fc));
            let model = ForecastModel { lambda, sign_seed: seed, ..Default::default() };
            let out = synthesize(&s, 0, n, &model).unwrap();
            for i in 0..n {
                prop_assert_eq!(out.values[i], s.actual()[i] * (1.0 + out.rel_errors[i]));
                prop_assert!(out.values[i] >= 0.0);
            }
            let again = synthesize(&s, 0, n, &model).unwrap();
            prop_assert_eq!(out, again);
        }
    }
}
