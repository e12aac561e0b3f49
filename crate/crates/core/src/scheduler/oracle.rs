//! Exhaustive enumeration over a power grid, for checking `solve` on small
//! instances. Shares no code with the solver beyond the problem types.

use super::{HorizonProblem, OracleError, PowerSchedule};

pub const ORACLE_MAX_INTERVALS: usize = 16;
const ORACLE_MAX_POINTS: u64 = 1 << 26;
const CHECK_TOL: f64 = 1e-9;

/// A broken constraint found by [`verify_schedule`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Shape(String),
    Power {
        session: usize,
        interval: usize,
        power: f64,
    },
    SocBounds {
        session: usize,
        boundary: usize,
        soc: f64,
    },
    Floor {
        session: usize,
        soc: f64,
        floor: f64,
    },
    Trajectory {
        session: usize,
        boundary: usize,
        expected: f64,
        reported: f64,
    },
}

/// Re-simulate `powers` from the problem definition and check every
/// constraint: power box, SOC box at every boundary (including just after
/// each day's consumption), morning floors, and agreement with the reported
/// trajectory when one is given.
pub fn verify_schedule(problem: &HorizonProblem, schedule: &PowerSchedule, tol: f64) -> Result<(), Violation> {
    if schedule.powers.len() != problem.sessions.len() {
        return Err(Violation::Shape("session count".into()));
    }
    let b = &problem.battery;
    let mut soc = problem.soc0;
    for (s, session) in problem.sessions.iter().enumerate() {
        let powers = &schedule.powers[s];
        if powers.len() != session.intensities.len() {
            return Err(Violation::Shape(format!("session {} length", s + 1)));
        }
        if s > 0 {
            soc -= problem.demands_kwh[s - 1] * 100.0 / b.capacity_kwh;
        }
        let reported = schedule.predicted_soc.get(s);
        for boundary in 0..=powers.len() {
            if boundary > 0 {
                let p = powers[boundary - 1];
                if !(p >= -tol && p <= b.max_power_kw + tol) {
                    return Err(Violation::Power {
                        session: s + 1,
                        interval: boundary,
                        power: p,
                    });
                }
                soc += p * problem.delta_t_hours * 100.0 / b.capacity_kwh;
            }
            if soc < b.soc_min - tol || soc > b.soc_max + tol {
                return Err(Violation::SocBounds {
                    session: s + 1,
                    boundary,
                    soc,
                });
            }
            if let Some(r) = reported.and_then(|r| r.get(boundary)) {
                if (r - soc).abs() > tol {
                    return Err(Violation::Trajectory {
                        session: s + 1,
                        boundary,
                        expected: soc,
                        reported: *r,
                    });
                }
            }
        }
        if soc < problem.morning_floors[s] - tol {
            return Err(Violation::Floor {
                session: s + 1,
                soc,
                floor: problem.morning_floors[s],
            });
        }
    }
    Ok(())
}

fn grid_cost(problem: &HorizonProblem, flat: &[f64]) -> f64 {
    let mut i = 0;
    let mut cost = 0.0;
    for session in &problem.sessions {
        for c in &session.intensities {
            cost += c * flat[i] * problem.delta_t_hours;
            i += 1;
        }
    }
    cost
}

fn unflatten(problem: &HorizonProblem, flat: &[f64]) -> Vec<Vec<f64>> {
    let mut it = flat.iter().copied();
    problem
        .sessions
        .iter()
        .map(|s| it.by_ref().take(s.len()).collect())
        .collect()
}

/// Minimum-cost feasible vector on `{0, P/(levels-1), ..., P}` per interval.
pub fn brute_force_oracle(problem: &HorizonProblem, levels: usize) -> Result<PowerSchedule, OracleError> {
    problem.validate()?;
    if levels < 2 {
        return Err(OracleError::Levels);
    }
    let intervals = problem.interval_count();
    let points = (levels as u64).checked_pow(intervals as u32).unwrap_or(u64::MAX);
    if intervals > ORACLE_MAX_INTERVALS || points > ORACLE_MAX_POINTS {
        return Err(OracleError::TooLarge { intervals, levels });
    }
    let grid: Vec<f64> = (0..levels)
        .map(|j| problem.battery.max_power_kw * j as f64 / (levels - 1) as f64)
        .collect();

    let mut digits = vec![0usize; intervals];
    let mut flat = vec![0.0; intervals];
    let mut best: Option<(f64, Vec<f64>)> = None;
    loop {
        for (f, d) in flat.iter_mut().zip(&digits) {
            *f = grid[*d];
        }
        let candidate = PowerSchedule {
            powers: unflatten(problem, &flat),
            predicted_soc: vec![],
            predicted_cost: 0.0,
        };
        if verify_schedule(problem, &candidate, CHECK_TOL).is_ok() {
            let cost = grid_cost(problem, &flat);
            if best.as_ref().map_or(true, |(b, _)| cost < *b) {
                best = Some((cost, flat.clone()));
            }
        }
        // odometer increment
        let mut i = 0;
        loop {
            if i == intervals {
                let (_, flat) = best.ok_or(OracleError::InfeasibleOnGrid)?;
                return Ok(PowerSchedule::from_powers(problem, unflatten(problem, &flat)));
            }
            digits[i] += 1;
            if digits[i] < levels {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}
