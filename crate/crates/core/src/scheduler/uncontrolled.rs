use serde::{Deserialize, Serialize};

use super::{HorizonProblem, PowerSchedule, ProblemError};

/// Plug-and-charge plan plus the sessions where even that falls short.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncontrolledSchedule {
    pub schedule: PowerSchedule,
    /// 1-based sessions whose end SOC stays below the morning floor.
    pub floor_violations: Vec<usize>,
}

/// Full power from each session start until `soc_max`, ignoring intensity.
/// Consumption that would take SOC below `soc_min` is clipped there.
pub fn uncontrolled_schedule(problem: &HorizonProblem) -> Result<UncontrolledSchedule, ProblemError> {
    problem.validate()?;
    let b = problem.battery;
    let per_kwh = b.soc_per_kwh();
    let dt = problem.delta_t_hours;
    let mut soc = problem.soc0;
    let mut powers = Vec::with_capacity(problem.sessions.len());
    let mut predicted_soc = Vec::with_capacity(problem.sessions.len());
    let mut floor_violations = Vec::new();
    let mut cost = 0.0;
    for (s, session) in problem.sessions.iter().enumerate() {
        if s > 0 {
            soc = (soc - problem.demands_kwh[s - 1] * per_kwh).max(b.soc_min);
        }
        let mut p = Vec::with_capacity(session.len());
        let mut trajectory = vec![soc];
        for c in &session.intensities {
            let power = ((b.soc_max - soc) / (dt * per_kwh)).clamp(0.0, b.max_power_kw);
            soc = (soc + power * dt * per_kwh).min(b.soc_max.max(soc));
            cost += c * power * dt;
            p.push(power);
            trajectory.push(soc);
        }
        if soc < problem.morning_floors[s] {
            floor_violations.push(s + 1);
        }
        powers.push(p);
        predicted_soc.push(trajectory);
    }
    Ok(UncontrolledSchedule {
        schedule: PowerSchedule {
            powers,
            predicted_soc,
            predicted_cost: cost,
        },
        floor_violations,
    })
}
