//! Rolling-horizon simulation of one vehicle over a date range.
//!
//! The clock advances one grid interval at a time. While the vehicle is
//! plugged in, the MPC strategy rebuilds an N-session horizon from the
//! current SOC, solves it against a forecast, and applies only the first
//! interval's power against the measured intensity.

mod engine;
mod metrics;
mod toy;

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::behavior::{BehaviorError, BehaviorModel, FixedSchedule};
use crate::forecast::{ForecastError, ForecastModel};
use crate::grid_data::GridError;
use crate::scheduler::{BatteryParams, ProblemError};

pub use engine::run;
pub use metrics::{compute_metrics, SessionTotals, Totals};
pub use toy::two_night_toy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    Uncontrolled,
    Mpc { horizon_days: usize },
}

impl Strategy {
    pub fn label(&self) -> String {
        match self {
            Strategy::Uncontrolled => "uncontrolled".into(),
            Strategy::Mpc { horizon_days } => format!("mpc{horizon_days}"),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for Strategy {
    type Err = String;

    /// `uncontrolled`, `mpc` (N = 1) or `mpcN` / `mpc:N`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        if s == "uncontrolled" {
            return Ok(Strategy::Uncontrolled);
        }
        let rest = s.strip_prefix("mpc").ok_or_else(|| format!("unknown strategy `{s}`"))?;
        let rest = rest.trim_start_matches([':', '=', '-']);
        let horizon_days = if rest.is_empty() {
            1
        } else {
            rest.parse().map_err(|_| format!("bad horizon in `{s}`"))?
        };
        if horizon_days == 0 {
            return Err("horizon must be >= 1".into());
        }
        Ok(Strategy::Mpc { horizon_days })
    }
}

/// Where plug windows and daily demand come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BehaviorSpec {
    /// Sampled daily plug times and energy, planned at the conservative
    /// quantile.
    Stochastic(BehaviorModel),
    /// The same window and demand every day; realized equals planned.
    Fixed(FixedSchedule),
}

impl Default for BehaviorSpec {
    fn default() -> Self {
        BehaviorSpec::Stochastic(BehaviorModel::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResolveCadence {
    /// Re-solve at every interval while plugged in.
    #[default]
    EveryStep,
    /// Solve once at the first controllable interval of each session and
    /// follow that plan.
    OncePerSession,
}

impl FromStr for ResolveCadence {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "step" | "every-step" => Ok(Self::EveryStep),
            "session" | "once-per-session" => Ok(Self::OncePerSession),
            other => Err(format!("unknown resolve cadence `{other}` (expected step|session)")),
        }
    }
}

/// One simulation scenario. `seed` drives both the behaviour draws and the
/// forecast sign stream; the seeds inside `behavior` and `forecast` are
/// overwritten by it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub strategy: Strategy,
    #[serde(default)]
    pub battery: BatteryParams,
    #[serde(default)]
    pub behavior: BehaviorSpec,
    /// First simulated day, at a midnight of the series grid.
    pub from: DateTime<Utc>,
    /// Exclusive end; sessions starting before it run to completion when
    /// data allows.
    pub to: DateTime<Utc>,
    #[serde(default = "default_fifty")]
    pub morning_floor: f64,
    #[serde(default = "default_fifty")]
    pub initial_soc: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub forecast: ForecastModel,
    #[serde(default)]
    pub perfect_forecast: bool,
    #[serde(default)]
    pub resolve: ResolveCadence,
}

fn default_fifty() -> f64 {
    50.0
}

impl ScenarioConfig {
    pub fn new(strategy: Strategy, from: DateTime<Utc>, to: DateTime<Utc>) -> Self {
        Self {
            strategy,
            battery: BatteryParams::default(),
            behavior: BehaviorSpec::default(),
            from,
            to,
            morning_floor: 50.0,
            initial_soc: 50.0,
            seed: 0,
            forecast: ForecastModel::default(),
            perfect_forecast: false,
            resolve: ResolveCadence::EveryStep,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.battery.validate().map_err(SimError::Problem)?;
        let b = self.battery;
        if !(b.soc_min..=b.soc_max).contains(&self.morning_floor) {
            return Err(SimError::Config(format!(
                "morning floor {} outside [{}, {}]",
                self.morning_floor, b.soc_min, b.soc_max
            )));
        }
        if !(b.soc_min..=b.soc_max).contains(&self.initial_soc) {
            return Err(SimError::Config(format!(
                "initial SOC {} outside [{}, {}]",
                self.initial_soc, b.soc_min, b.soc_max
            )));
        }
        if self.to <= self.from {
            return Err(SimError::Config("date range is empty".into()));
        }
        if let Strategy::Mpc { horizon_days: 0 } = self.strategy {
            return Err(SimError::Config("MPC horizon must be >= 1 day".into()));
        }
        self.forecast.validate().map_err(SimError::Forecast)?;
        Ok(())
    }
}

/// One clock interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub timestamp: DateTime<Utc>,
    pub plugged: bool,
    /// Day index of the session the vehicle is plugged into.
    pub session: Option<usize>,
    /// kW over the interval.
    pub power: f64,
    /// Percent, at the end of the interval.
    pub soc: f64,
    pub actual_intensity: f64,
    /// gCO2 for the interval.
    pub emitted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    /// The horizon could not meet a floor; floors were lowered to what full
    /// power reaches.
    InfeasibleHorizon {
        session: usize,
        required_soc: f64,
        achievable_soc: f64,
    },
    /// Driving needed more energy than the battery held above `soc_min`.
    ConsumptionShortfall { requested_kwh: f64, available_kwh: f64 },
    /// SOC at plug-out stayed under the morning floor.
    MorningShortfall { floor: f64, soc: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub timestamp: DateTime<Utc>,
    pub day: usize,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub strategy: Strategy,
    pub seed: u64,
    pub initial_soc: f64,
    pub log: Vec<StepRecord>,
    pub totals: Totals,
    pub events: Vec<SimEvent>,
    /// Energy drawn by driving after `soc_min` clamping, kWh.
    pub consumed_kwh: f64,
    pub final_soc: f64,
}

impl SimResult {
    /// Step log as CSV with a fixed header.
    pub fn log_csv(&self) -> String {
        let mut out = String::from("timestamp,plugged,session,power_kw,soc_pct,actual_gco2_per_kwh,emitted_gco2\n");
        for r in &self.log {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.timestamp.format("%Y-%m-%dT%H:%MZ"),
                u8::from(r.plugged),
                r.session.map_or(String::new(), |s| s.to_string()),
                r.power,
                r.soc,
                r.actual_intensity,
                r.emitted
            ));
        }
        out
    }

    pub fn shortfall_count(&self) -> usize {
        self.events.len()
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Behavior(#[from] BehaviorError),
    #[error(transparent)]
    Forecast(#[from] ForecastError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("step log is empty")]
    EmptyLog,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategy_parsing() {
        assert_eq!("uncontrolled".parse::<Strategy>().unwrap(), Strategy::Uncontrolled);
        assert_eq!("mpc".parse::<Strategy>().unwrap(), Strategy::Mpc { horizon_days: 1 });
        assert_eq!("MPC4".parse::<Strategy>().unwrap(), Strategy::Mpc { horizon_days: 4 });
        assert_eq!("mpc:7".parse::<Strategy>().unwrap(), Strategy::Mpc { horizon_days: 7 });
        assert!("mpc0".parse::<Strategy>().is_err());
        assert!("greedy".parse::<Strategy>().is_err());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let from = "2022-01-01T00:00:00Z".parse().unwrap();
        let to = "2022-02-01T00:00:00Z".parse().unwrap();
        let mut cfg = ScenarioConfig::new(Strategy::Mpc { horizon_days: 4 }, from, to);
        cfg.resolve = ResolveCadence::OncePerSession;
        let text = toml::to_string(&cfg).unwrap();
        let back: ScenarioConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn config_validation() {
        let from = "2022-01-01T00:00:00Z".parse().unwrap();
        let mut cfg = ScenarioConfig::new(Strategy::Uncontrolled, from, from);
        assert!(cfg.validate().is_err());
        cfg.to = "2022-01-02T00:00:00Z".parse().unwrap();
        assert!(cfg.validate().is_ok());
        cfg.morning_floor = 90.0;
        assert!(cfg.validate().is_err());
    }
}
