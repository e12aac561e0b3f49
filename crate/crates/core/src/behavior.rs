//! Driver behaviour: when the car is plugged in and out, how much energy each
//! day's driving uses, and the conservative planning values derived from
//! those distributions.

use std::fmt;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use statrs::distribution::{ContinuousCDF, Normal as StatNormal};
use thiserror::Error;

use crate::rng::{keyed_stream, DOMAIN_BEHAVIOR};

const MINUTES_PER_DAY: f64 = 1440.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BehaviorError {
    #[error("invalid behaviour model: {0}")]
    Invalid(String),
    #[error("planned window is empty after quantization ({start} .. {end})")]
    EmptyWindow { start: ClockTime, end: ClockTime },
}

/// Minutes after midnight. Values past 24:00 denote the following day.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ClockTime(pub f64);

impl ClockTime {
    pub fn hm(hour: u32, minute: u32) -> Self {
        Self((hour * 60 + minute) as f64)
    }

    pub fn minutes(self) -> f64 {
        self.0
    }

    pub fn parse(raw: &str) -> Result<Self, String> {
        let (h, m) = raw
            .trim()
            .split_once(':')
            .ok_or_else(|| format!("expected HH:MM, got `{raw}`"))?;
        let h: u32 = h.parse().map_err(|_| format!("bad hour in `{raw}`"))?;
        let m: u32 = m.parse().map_err(|_| format!("bad minute in `{raw}`"))?;
        if h > 47 || m > 59 {
            return Err(format!("`{raw}` out of range"));
        }
        Ok(Self::hm(h, m))
    }
}

impl fmt::Display for ClockTime {
    /// Wall-clock `HH:MM`, rounded to the nearest minute.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = (self.0.round() as i64).rem_euclid(1440);
        write!(f, "{:02}:{:02}", m / 60, m % 60)
    }
}

impl Serialize for ClockTime {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let m = self.0.round() as i64;
        s.serialize_str(&format!("{:02}:{:02}", m / 60, m % 60))
    }
}

impl<'de> Deserialize<'de> for ClockTime {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        Self::parse(&raw).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BehaviorModel {
    pub plugin_mean: ClockTime,
    pub plugin_sd_minutes: f64,
    pub plugout_mean: ClockTime,
    pub plugout_sd_minutes: f64,
    pub energy_mean_kwh: f64,
    pub energy_sd_kwh: f64,
    pub planning_quantile: f64,
    pub seed: u64,
}

impl Default for BehaviorModel {
    fn default() -> Self {
        Self {
            plugin_mean: ClockTime::hm(18, 0),
            plugin_sd_minutes: 60.0,
            plugout_mean: ClockTime::hm(9, 0),
            plugout_sd_minutes: 60.0,
            energy_mean_kwh: 5.8,
            energy_sd_kwh: 2.67,
            planning_quantile: 0.98,
            seed: 0,
        }
    }
}

/// Planned plug-in window relative to the plug-in day's midnight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannedWindow {
    /// Percentile times before snapping to the grid.
    pub raw_start: ClockTime,
    pub raw_end: ClockTime,
    /// Grid-aligned window (start rounded up, end rounded down).
    pub start: ClockTime,
    pub end: ClockTime,
}

impl PlannedWindow {
    pub fn length_minutes(&self) -> f64 {
        self.end.0 - self.start.0
    }
}

/// One day's realized plug-in, plug-out and driving energy. Times are
/// minutes after that day's midnight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionRealization {
    pub plug_in_minute: f64,
    pub plug_out_minute: f64,
    pub day_energy_kwh: f64,
}

impl BehaviorModel {
    pub fn validate(&self) -> Result<(), BehaviorError> {
        if !(self.plugin_sd_minutes > 0.0 && self.plugout_sd_minutes > 0.0) {
            return Err(BehaviorError::Invalid("time standard deviations must be > 0".into()));
        }
        if !(self.energy_sd_kwh >= 0.0) {
            return Err(BehaviorError::Invalid("energy standard deviation must be >= 0".into()));
        }
        if !(0.5..1.0).contains(&self.planning_quantile) {
            return Err(BehaviorError::Invalid(format!(
                "planning quantile {} must lie in [0.5, 1)",
                self.planning_quantile
            )));
        }
        Ok(())
    }

    /// Standard-normal quantile at the planning probability.
    pub fn planning_z(&self) -> f64 {
        if self.planning_quantile == 0.5 {
            return 0.0;
        }
        StatNormal::new(0.0, 1.0)
            .expect("unit normal")
            .inverse_cdf(self.planning_quantile)
    }

    /// Plug-out mean expressed on the plug-in day's clock.
    fn plugout_mean_after_plugin(&self) -> f64 {
        let mut m = self.plugout_mean.0;
        while m <= self.plugin_mean.0 {
            m += MINUTES_PER_DAY;
        }
        m
    }

    /// Late-start / early-end window, snapped inward to `step_minutes`.
    pub fn conservative_window(&self, step_minutes: i64) -> Result<PlannedWindow, BehaviorError> {
        self.validate()?;
        let z = self.planning_z();
        let raw_start = self.plugin_mean.0 + z * self.plugin_sd_minutes;
        let raw_end = self.plugout_mean_after_plugin() - z * self.plugout_sd_minutes;
        let step = step_minutes as f64;
        let start = (raw_start / step).ceil() * step;
        let end = (raw_end / step).floor() * step;
        if end <= start {
            return Err(BehaviorError::EmptyWindow {
                start: ClockTime(start),
                end: ClockTime(end),
            });
        }
        Ok(PlannedWindow {
            raw_start: ClockTime(raw_start),
            raw_end: ClockTime(raw_end),
            start: ClockTime(start),
            end: ClockTime(end),
        })
    }

    /// High-percentile daily energy used for planning.
    pub fn conservative_energy(&self) -> f64 {
        self.energy_mean_kwh + self.planning_z() * self.energy_sd_kwh
    }

    /// Draws for `day_index`, a pure function of `(seed, day_index)`.
    pub fn sample_day(&self, day_index: u64) -> SessionRealization {
        let mut rng = keyed_stream(self.seed, DOMAIN_BEHAVIOR, day_index);
        let plug_in = Normal::new(self.plugin_mean.0, self.plugin_sd_minutes).expect("validated sd");
        let plug_out = Normal::new(self.plugout_mean_after_plugin(), self.plugout_sd_minutes).expect("validated sd");
        let plug_in_minute = plug_in.sample(&mut rng);
        let plug_out_minute = loop {
            let t = plug_out.sample(&mut rng);
            if t > plug_in_minute {
                break t;
            }
        };
        let day_energy_kwh = if self.energy_sd_kwh == 0.0 {
            self.energy_mean_kwh.max(0.0)
        } else {
            let energy = Normal::new(self.energy_mean_kwh, self.energy_sd_kwh).expect("validated sd");
            resample_non_negative(|| energy.sample(&mut rng))
        };
        SessionRealization {
            plug_in_minute,
            plug_out_minute,
            day_energy_kwh,
        }
    }
}

/// First non-negative draw. Rejection keeps the truncated normal shape and
/// avoids a point mass at zero.
fn resample_non_negative(mut draw: impl FnMut() -> f64) -> f64 {
    loop {
        let v = draw();
        if v >= 0.0 {
            return v;
        }
    }
}

/// Deterministic plug window and daily demand, bypassing sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedSchedule {
    /// Window midpoint on the clock.
    pub center: ClockTime,
    pub length_hours: f64,
    pub demand_kwh: f64,
}

impl FixedSchedule {
    /// Window start normalized into `[00:00, 24:00)`, end possibly next day.
    pub fn window(&self, step_minutes: i64) -> Result<PlannedWindow, BehaviorError> {
        let length = self.length_hours * 60.0;
        let raw_start = (self.center.0 - length / 2.0).rem_euclid(MINUTES_PER_DAY);
        let raw_end = raw_start + length;
        let step = step_minutes as f64;
        let start = (raw_start / step).ceil() * step;
        let end = (raw_end / step).floor() * step;
        if !(length < MINUTES_PER_DAY) || end <= start {
            return Err(BehaviorError::EmptyWindow {
                start: ClockTime(start),
                end: ClockTime(end),
            });
        }
        Ok(PlannedWindow {
            raw_start: ClockTime(raw_start),
            raw_end: ClockTime(raw_end),
            start: ClockTime(start),
            end: ClockTime(end),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_window_before_and_after_quantization() {
        let w = BehaviorModel::default().conservative_window(30).unwrap();
        assert_eq!(w.raw_start.to_string(), "20:03");
        assert_eq!(w.raw_end.to_string(), "06:57");
        assert_eq!(w.start.to_string(), "20:30");
        assert_eq!(w.end.to_string(), "06:30");
        assert_eq!(w.end.minutes(), 1440.0 + 390.0);
    }

    #[test]
    fn median_quantile_gives_means() {
        let m = BehaviorModel {
            planning_quantile: 0.5,
            ..Default::default()
        };
        let w = m.conservative_window(30).unwrap();
        assert_eq!(w.start.to_string(), "18:00");
        assert_eq!(w.end.to_string(), "09:00");
        assert_eq!(m.conservative_energy(), 5.8);
    }

    #[test]
    fn conservative_energy_default() {
        let e = BehaviorModel::default().conservative_energy();
        assert!((e - 11.28).abs() < 0.005, "{e}");
    }

    #[test]
    fn zero_energy_spread_returns_mean() {
        let m = BehaviorModel {
            energy_sd_kwh: 0.0,
            planning_quantile: 0.9,
            ..Default::default()
        };
        assert_eq!(m.conservative_energy(), 5.8);
        assert_eq!(m.sample_day(3).day_energy_kwh, 5.8);
    }

    #[test]
    fn overlapping_means_make_an_empty_window() {
        let m = BehaviorModel {
            plugin_mean: ClockTime::hm(8, 0),
            plugout_mean: ClockTime::hm(11, 0),
            ..Default::default()
        };
        assert!(matches!(
            m.conservative_window(30),
            Err(BehaviorError::EmptyWindow { .. })
        ));
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(BehaviorModel {
            plugin_sd_minutes: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(BehaviorModel {
            planning_quantile: 1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(BehaviorModel {
            planning_quantile: 0.3,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn sampling_is_deterministic_per_day() {
        let m = BehaviorModel {
            seed: 11,
            ..Default::default()
        };
        assert_eq!(m.sample_day(0), m.sample_day(0));
        assert_ne!(m.sample_day(0), m.sample_day(1));
        let r = m.sample_day(5);
        assert!(r.plug_out_minute > r.plug_in_minute);
        assert!(r.day_energy_kwh >= 0.0);
    }

    #[test]
    fn negative_draws_are_resampled() {
        let mut draws = [-1.2, -0.3, 4.0].into_iter();
        assert_eq!(resample_non_negative(|| draws.next().unwrap()), 4.0);
    }

    #[test]
    fn fixed_windows_wrap_midnight() {
        let night = FixedSchedule {
            center: ClockTime::hm(1, 0),
            length_hours: 20.0,
            demand_kwh: 5.0,
        };
        let w = night.window(30).unwrap();
        assert_eq!((w.start.minutes(), w.end.minutes()), (900.0, 2100.0));
        let day = FixedSchedule {
            center: ClockTime::hm(13, 0),
            length_hours: 4.0,
            demand_kwh: 5.0,
        };
        let w = day.window(30).unwrap();
        assert_eq!((w.start.minutes(), w.end.minutes()), (660.0, 900.0));
        let bad = FixedSchedule {
            center: ClockTime::hm(13, 0),
            length_hours: 0.2,
            demand_kwh: 5.0,
        };
        assert!(bad.window(30).is_err());
    }

    #[test]
    fn clock_parsing() {
        assert_eq!(ClockTime::parse("18:00").unwrap(), ClockTime::hm(18, 0));
        assert!(ClockTime::parse("18").is_err());
        assert!(ClockTime::parse("18:75").is_err());
    }
}
