use chrono::{DateTime, Utc};

use super::{BehaviorSpec, ScenarioConfig, Strategy};
use crate::behavior::{ClockTime, FixedSchedule};
use crate::grid_data::CarbonSeries;

/// Two days, each with a one-hour plug window at 00:30-01:30. Night one is
/// cheap (90, 95), night two expensive (200, 220); everything else is 500.
/// Charging 5 kWh a day from 60% with a 60% floor costs 1450 g planned one
/// night at a time and 925 g with two-night look-ahead.
pub fn two_night_toy(strategy: Strategy) -> (CarbonSeries, ScenarioConfig) {
    let start: DateTime<Utc> = "2023-01-01T00:00:00Z".parse().expect("literal timestamp");
    let mut actual = vec![500.0; 96];
    actual[1] = 90.0;
    actual[2] = 95.0;
    actual[49] = 200.0;
    actual[50] = 220.0;
    let series = CarbonSeries::new(0, "toy", start, actual, None).expect("valid toy series");
    let mut config = ScenarioConfig::new(strategy, start, series.end());
    config.behavior = BehaviorSpec::Fixed(FixedSchedule {
        center: ClockTime::hm(1, 0),
        length_hours: 1.0,
        demand_kwh: 5.0,
    });
    config.morning_floor = 60.0;
    config.initial_soc = 60.0;
    config.perfect_forecast = true;
    (series, config)
}
