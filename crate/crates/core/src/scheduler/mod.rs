//! Net-carbon minimization of charging power over an N-session horizon.
//!
//! Decision variables are the powers `P[s,k]` of every charging interval. SOC
//! rises by `P * dt * 100 / B` per interval and falls by `E_s * 100 / B`
//! between sessions. Powers are boxed by `[0, P_max]`, SOC by
//! `[soc_min, soc_max]`, and each session must end at or above its morning
//! floor.

mod oracle;
mod solve;
mod uncontrolled;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use oracle::{brute_force_oracle, verify_schedule, Violation, ORACLE_MAX_INTERVALS};
pub use solve::solve;
pub use uncontrolled::{uncontrolled_schedule, UncontrolledSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatteryParams {
    pub capacity_kwh: f64,
    pub max_power_kw: f64,
    /// Lower operating bound, percent.
    pub soc_min: f64,
    /// Upper operating bound, percent.
    pub soc_max: f64,
}

impl Default for BatteryParams {
    fn default() -> Self {
        Self {
            capacity_kwh: 50.0,
            max_power_kw: 10.0,
            soc_min: 20.0,
            soc_max: 80.0,
        }
    }
}

impl BatteryParams {
    pub fn validate(&self) -> Result<(), ProblemError> {
        if !(self.capacity_kwh > 0.0 && self.capacity_kwh.is_finite()) {
            return Err(ProblemError::Battery(format!(
                "capacity {} must be > 0",
                self.capacity_kwh
            )));
        }
        if !(self.max_power_kw > 0.0 && self.max_power_kw.is_finite()) {
            return Err(ProblemError::Battery(format!(
                "max power {} must be > 0",
                self.max_power_kw
            )));
        }
        if !(0.0 <= self.soc_min && self.soc_min < self.soc_max && self.soc_max <= 100.0) {
            return Err(ProblemError::Battery(format!(
                "need 0 <= soc_min ({}) < soc_max ({}) <= 100",
                self.soc_min, self.soc_max
            )));
        }
        Ok(())
    }

    /// SOC points per kWh.
    pub fn soc_per_kwh(&self) -> f64 {
        100.0 / self.capacity_kwh
    }
}

/// One planned charging session inside the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionWindow {
    /// Offset of the first charging interval from the horizon datum.
    pub first_interval: usize,
    /// Predicted intensity (gCO2e/kWh) for each charging interval.
    pub intensities: Vec<f64>,
}

impl SessionWindow {
    pub fn new(first_interval: usize, intensities: Vec<f64>) -> Self {
        Self {
            first_interval,
            intensities,
        }
    }

    pub fn last_interval(&self) -> usize {
        self.first_interval + self.intensities.len() - 1
    }

    pub fn len(&self) -> usize {
        self.intensities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intensities.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonProblem {
    pub sessions: Vec<SessionWindow>,
    /// Energy used between session `s` and `s+1` (kWh). A trailing entry for
    /// the day after the last session is accepted and ignored.
    pub demands_kwh: Vec<f64>,
    /// SOC (%) at the start of the first session.
    pub soc0: f64,
    /// Minimum SOC (%) at the end of each session.
    pub morning_floors: Vec<f64>,
    pub battery: BatteryParams,
    pub delta_t_hours: f64,
}

impl HorizonProblem {
    pub fn validate(&self) -> Result<(), ProblemError> {
        self.battery.validate()?;
        let n = self.sessions.len();
        if n == 0 {
            return Err(ProblemError::Shape("no sessions".into()));
        }
        if !(self.delta_t_hours > 0.0 && self.delta_t_hours.is_finite()) {
            return Err(ProblemError::Shape(format!(
                "delta_t {} must be > 0",
                self.delta_t_hours
            )));
        }
        if self.morning_floors.len() != n {
            return Err(ProblemError::Shape(format!(
                "{} floors for {n} sessions",
                self.morning_floors.len()
            )));
        }
        if self.demands_kwh.len() + 1 < n || self.demands_kwh.len() > n {
            return Err(ProblemError::Shape(format!(
                "{} demands for {n} sessions",
                self.demands_kwh.len()
            )));
        }
        let mut previous_last: Option<usize> = None;
        for (s, session) in self.sessions.iter().enumerate() {
            if session.is_empty() {
                return Err(ProblemError::Shape(format!("session {} has no intervals", s + 1)));
            }
            if let Some(c) = session.intensities.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
                return Err(ProblemError::Shape(format!("session {} has intensity {c}", s + 1)));
            }
            if previous_last.is_some_and(|p| session.first_interval <= p) {
                return Err(ProblemError::Shape(format!(
                    "session {} overlaps its predecessor",
                    s + 1
                )));
            }
            previous_last = Some(session.last_interval());
        }
        if let Some(d) = self.demands_kwh.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(ProblemError::Shape(format!("demand {d} must be >= 0")));
        }
        let (lo, hi) = (self.battery.soc_min, self.battery.soc_max);
        if !(lo <= self.soc0 && self.soc0 <= hi) {
            return Err(ProblemError::Shape(format!("soc0 {} outside [{lo}, {hi}]", self.soc0)));
        }
        if let Some(f) = self.morning_floors.iter().find(|f| !(lo <= **f && **f <= hi)) {
            return Err(ProblemError::Shape(format!("floor {f} outside [{lo}, {hi}]")));
        }
        Ok(())
    }

    pub fn interval_count(&self) -> usize {
        self.sessions.iter().map(SessionWindow::len).sum()
    }

    /// SOC gained by one interval at full power.
    pub fn max_soc_step(&self) -> f64 {
        self.battery.max_power_kw * self.delta_t_hours * self.battery.soc_per_kwh()
    }

    /// Demand between session `s` and `s+1` in SOC points (zero after the last session).
    pub fn demand_soc(&self, s: usize) -> f64 {
        if s + 1 < self.sessions.len() {
            self.demands_kwh[s] * self.battery.soc_per_kwh()
        } else {
            0.0
        }
    }
}

/// Charging plan with its predicted SOC trajectory and net carbon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSchedule {
    /// kW per charging interval, per session.
    pub powers: Vec<Vec<f64>>,
    /// SOC (%) at each interval boundary, per session (`len + 1` entries).
    pub predicted_soc: Vec<Vec<f64>>,
    /// Predicted net carbon, gCO2.
    pub predicted_cost: f64,
}

impl PowerSchedule {
    /// Roll the dynamics forward from `problem.soc0` under `powers`.
    pub fn from_powers(problem: &HorizonProblem, powers: Vec<Vec<f64>>) -> Self {
        let per_kwh = problem.battery.soc_per_kwh();
        let dt = problem.delta_t_hours;
        let mut soc = problem.soc0;
        let mut predicted_soc = Vec::with_capacity(powers.len());
        let mut cost = 0.0;
        for (s, (session, p)) in problem.sessions.iter().zip(&powers).enumerate() {
            if s > 0 {
                soc -= problem.demands_kwh[s - 1] * per_kwh;
            }
            let mut trajectory = Vec::with_capacity(p.len() + 1);
            trajectory.push(soc);
            for (c, power) in session.intensities.iter().zip(p) {
                soc += power * dt * per_kwh;
                cost += c * power * dt;
                trajectory.push(soc);
            }
            predicted_soc.push(trajectory);
        }
        Self {
            powers,
            predicted_soc,
            predicted_cost: cost,
        }
    }

    pub fn first_power(&self) -> f64 {
        self.powers.first().and_then(|p| p.first()).copied().unwrap_or(0.0)
    }

    pub fn total_energy_kwh(&self, delta_t_hours: f64) -> f64 {
        self.powers.iter().flatten().sum::<f64>() * delta_t_hours
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("battery: {0}")]
    Battery(String),
    #[error("problem: {0}")]
    Shape(String),
}

/// The first session whose end-of-session requirement cannot be reached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Infeasibility {
    /// 1-based session number.
    pub session: usize,
    pub required_soc: f64,
    pub achievable_soc: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(transparent)]
    Invalid(#[from] ProblemError),
    #[error(
        "infeasible: session {} needs SOC {:.3} but at most {:.3} is reachable",
        .0.session, .0.required_soc, .0.achievable_soc
    )]
    Infeasible(Infeasibility),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error(transparent)]
    Invalid(#[from] ProblemError),
    #[error("{intervals} intervals at {levels} levels exceeds the enumeration bound")]
    TooLarge { intervals: usize, levels: usize },
    #[error("levels must be >= 2")]
    Levels,
    #[error("no feasible power vector on the grid")]
    InfeasibleOnGrid,
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Four intervals, single session, from the worked example.
    pub fn single_session() -> HorizonProblem {
        HorizonProblem {
            sessions: vec![SessionWindow::new(0, vec![300.0, 100.0, 200.0, 150.0])],
            demands_kwh: vec![],
            soc0: 40.0,
            morning_floors: vec![60.0],
            battery: BatteryParams::default(),
            delta_t_hours: 0.5,
        }
    }

    /// Cheap first night, expensive second night.
    pub fn two_nights() -> HorizonProblem {
        HorizonProblem {
            sessions: vec![
                SessionWindow::new(0, vec![90.0, 95.0]),
                SessionWindow::new(48, vec![200.0, 220.0]),
            ],
            demands_kwh: vec![5.0],
            soc0: 50.0,
            morning_floors: vec![60.0, 60.0],
            battery: BatteryParams::default(),
            delta_t_hours: 0.5,
        }
    }
}
