use std::f64::consts::TAU;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::grid_data::{CarbonSeries, GridError};

/// Half-hourly pseudo-periodic intensity: a daily cycle on top of slow
/// day-scale swings built from incommensurate periods, so neighbouring
/// nights differ and look-ahead pays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSignal {
    pub start: DateTime<Utc>,
    pub days: usize,
    pub base: f64,
    /// Peak-to-mean of the daily cycle.
    pub daily_amplitude: f64,
    /// Hour of the daily minimum.
    pub trough_hour: f64,
    pub modulation_amplitude: f64,
    /// Periods of the two modulation components, days.
    pub modulation_periods: (f64, f64),
    pub floor: f64,
}

impl Default for SyntheticSignal {
    fn default() -> Self {
        Self {
            start: "2022-01-01T00:00:00Z".parse().expect("literal timestamp"),
            days: 365,
            base: 200.0,
            daily_amplitude: 60.0,
            trough_hour: 3.0,
            modulation_amplitude: 90.0,
            modulation_periods: (3.7, 9.1),
            floor: 15.0,
        }
    }
}

impl SyntheticSignal {
    pub fn value(&self, index: usize) -> f64 {
        let hours = index as f64 * 0.5;
        let day = hours / 24.0;
        let daily = -(TAU * (hours - self.trough_hour) / 24.0).cos();
        let (p1, p2) = self.modulation_periods;
        let slow = 0.6 * (TAU * day / p1).sin() + 0.4 * (TAU * day / p2 + 1.3).sin();
        (self.base + self.daily_amplitude * daily + self.modulation_amplitude * slow).max(self.floor)
    }

    /// National-style series (region 0) with no stored forecast.
    pub fn series(&self) -> Result<CarbonSeries, GridError> {
        let actual = (0..self.days * 48).map(|i| self.value(i)).collect();
        CarbonSeries::new(0, "synthetic", self.start, actual, None)
    }
}
