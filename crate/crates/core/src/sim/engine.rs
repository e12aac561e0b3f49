use std::collections::BTreeSet;

use chrono::Timelike;

use super::{
    compute_metrics, BehaviorSpec, EventKind, ResolveCadence, ScenarioConfig, SimError, SimEvent, SimResult,
    StepRecord, Strategy,
};
use crate::forecast::{perfect, synthesize};
use crate::grid_data::{CarbonSeries, GridError};
use crate::scheduler::{
    solve, uncontrolled_schedule, BatteryParams, HorizonProblem, PowerSchedule, SessionWindow, SolveError,
};

/// Interval spans of one simulated day, as absolute series indices
/// (half-open, possibly past the series end).
#[derive(Debug, Clone, Copy)]
struct DayPlan {
    planned: (i64, i64),
    plugged: (i64, i64),
    energy_kwh: f64,
}

struct Calendar {
    days: Vec<DayPlan>,
    /// Planning demand per day, kWh.
    planning_energy: f64,
}

fn build_calendar(
    config: &ScenarioConfig,
    first: i64,
    days: usize,
    step: i64,
    epoch_day: i64,
) -> Result<Calendar, SimError> {
    let per_day = 1440 / step;
    let to_idx = |minutes: f64| (minutes / step as f64).round() as i64;
    match config.behavior {
        BehaviorSpec::Fixed(fixed) => {
            let w = fixed.window(step)?;
            let span = (to_idx(w.start.minutes()), to_idx(w.end.minutes()));
            let days = (0..days as i64)
                .map(|d| {
                    let base = first + d * per_day;
                    let planned = (base + span.0, base + span.1);
                    DayPlan {
                        planned,
                        plugged: planned,
                        energy_kwh: fixed.demand_kwh,
                    }
                })
                .collect();
            Ok(Calendar {
                days,
                planning_energy: fixed.demand_kwh,
            })
        }
        BehaviorSpec::Stochastic(model) => {
            let model = crate::behavior::BehaviorModel {
                seed: config.seed,
                ..model
            };
            let w = model.conservative_window(step)?;
            let span = (to_idx(w.start.minutes()), to_idx(w.end.minutes()));
            let days = (0..days as i64)
                .map(|d| {
                    let base = first + d * per_day;
                    let draw = model.sample_day((epoch_day + d) as u64);
                    // whole intervals inside the realized span
                    let a = (draw.plug_in_minute / step as f64).ceil() as i64;
                    let b = (draw.plug_out_minute / step as f64).floor() as i64;
                    DayPlan {
                        planned: (base + span.0, base + span.1),
                        plugged: (base + a, base + b.max(a)),
                        energy_kwh: draw.day_energy_kwh,
                    }
                })
                .collect();
            Ok(Calendar {
                days,
                planning_energy: model.conservative_energy(),
            })
        }
    }
}

/// Lowers unreachable floors to the full-power trajectory and clips
/// demands that trajectory cannot cover.
fn repair(problem: &HorizonProblem) -> Result<HorizonProblem, SolveError> {
    let full = uncontrolled_schedule(problem).map_err(SolveError::Invalid)?;
    let b = problem.battery;
    let mut fixed = problem.clone();
    for (s, traj) in full.schedule.predicted_soc.iter().enumerate() {
        let reach = *traj.last().expect("non-empty trajectory");
        fixed.morning_floors[s] = fixed.morning_floors[s].min(reach).max(b.soc_min);
        if s + 1 < problem.sessions.len() {
            let room = ((reach - b.soc_min) / b.soc_per_kwh()).max(0.0);
            fixed.demands_kwh[s] = fixed.demands_kwh[s].min(room);
        }
    }
    Ok(fixed)
}

struct Planner<'a> {
    config: &'a ScenarioConfig,
    series: &'a CarbonSeries,
    calendar: &'a Calendar,
    floor: f64,
    horizon_days: usize,
}

struct Plan {
    schedule: PowerSchedule,
    infeasible: Option<(usize, f64, f64)>,
}

impl Planner<'_> {
    fn plan(&self, now: usize, day: usize, soc: f64) -> Result<Plan, SimError> {
        let len = self.series.len() as i64;
        let b = self.config.battery;
        let first_end = self.calendar.days[day].planned.1.min(len);
        let mut spans = vec![(now as i64, first_end)];
        for d in day + 1..day + self.horizon_days {
            let planned = match self.calendar.days.get(d) {
                Some(p) => p.planned,
                None => {
                    // beyond the simulated range: same window shape, one day later each
                    let last = self.calendar.days.last().expect("non-empty calendar").planned;
                    let per_day = 1440 / self.series.grid().step_minutes();
                    let shift = (d + 1 - self.calendar.days.len()) as i64 * per_day;
                    (last.0 + shift, last.1 + shift)
                }
            };
            if planned.1 > len {
                break;
            }
            spans.push(planned);
        }
        let horizon = (spans.last().expect("first session").1 - now as i64) as usize;
        let forecast = if self.config.perfect_forecast {
            perfect(self.series, now, horizon)?
        } else {
            let model = crate::forecast::ForecastModel {
                sign_seed: self.config.seed,
                ..self.config.forecast
            };
            synthesize(self.series, now, horizon, &model)?
        };
        let sessions = spans
            .iter()
            .map(|&(a, e)| {
                let off = (a - now as i64) as usize;
                let n = (e - a) as usize;
                SessionWindow::new(off, forecast.values[off..off + n].to_vec())
            })
            .collect::<Vec<_>>();
        let n = sessions.len();
        let problem = HorizonProblem {
            sessions,
            demands_kwh: vec![self.calendar.planning_energy; n - 1],
            soc0: soc.clamp(b.soc_min, b.soc_max),
            morning_floors: vec![self.floor; n],
            battery: b,
            delta_t_hours: self.series.delta_t_hours(),
        };
        match solve(&problem) {
            Ok(schedule) => Ok(Plan {
                schedule,
                infeasible: None,
            }),
            Err(SolveError::Infeasible(diag)) => {
                let fixed = repair(&problem).map_err(|e| SimError::Config(e.to_string()))?;
                let schedule = match solve(&fixed) {
                    Ok(s) => s,
                    Err(_) => uncontrolled_schedule(&fixed)?.schedule,
                };
                Ok(Plan {
                    schedule,
                    infeasible: Some((diag.session, diag.required_soc, diag.achievable_soc)),
                })
            }
            Err(SolveError::Invalid(e)) => Err(SimError::Problem(e)),
        }
    }
}

fn full_power_until_cap(b: &BatteryParams, soc: f64, dt: f64) -> f64 {
    ((b.soc_max - soc) / (dt * b.soc_per_kwh())).clamp(0.0, b.max_power_kw)
}

/// Simulates `config` against the measured intensities in `series`.
pub fn run(config: &ScenarioConfig, series: &CarbonSeries) -> Result<SimResult, SimError> {
    config.validate()?;
    let grid = series.grid();
    let step = grid.step_minutes();
    let per_day = 1440 / step;
    let coverage = || GridError::OutOfCoverage {
        from: config.from,
        to: config.to,
    };
    if config.from.time().num_seconds_from_midnight() != 0 {
        return Err(SimError::Config(format!(
            "range start {} is not a midnight",
            config.from
        )));
    }
    let first = series
        .offset_of(config.from)
        .ok_or(GridError::Misaligned(config.from))?;
    let last = series.offset_of(config.to).ok_or(GridError::Misaligned(config.to))?;
    if first < 0 || last > series.len() as i64 {
        return Err(coverage().into());
    }
    let days = ((last - first) + per_day - 1) / per_day;
    let epoch_day = config.from.timestamp().div_euclid(86_400);
    let calendar = build_calendar(config, first, days as usize, step, epoch_day)?;

    let b = config.battery;
    let per_kwh = b.soc_per_kwh();
    let dt = series.delta_t_hours();
    let floor = config
        .morning_floor
        .max(b.soc_min + calendar.planning_energy * per_kwh)
        .min(b.soc_max);
    let horizon_days = match config.strategy {
        Strategy::Mpc { horizon_days } => horizon_days,
        Strategy::Uncontrolled => 0,
    };
    let planner = Planner {
        config,
        series,
        calendar: &calendar,
        floor,
        horizon_days,
    };

    let clock_end = calendar
        .days
        .iter()
        .map(|d| d.plugged.1.max(d.planned.1))
        .fold(last, i64::max)
        .min(series.len() as i64) as usize;
    let first = first as usize;

    let plugged_day = |i: usize| {
        let i = i as i64;
        let d = ((i - first as i64) / per_day) as usize;
        [d.checked_sub(1), Some(d)]
            .into_iter()
            .flatten()
            .filter(|&d| d < calendar.days.len())
            .find(|&d| (calendar.days[d].plugged.0..calendar.days[d].plugged.1).contains(&i))
    };

    let mut soc = config.initial_soc;
    let mut log = Vec::with_capacity(clock_end - first);
    let mut events = Vec::new();
    let mut consumed = 0.0;
    let mut next_consumption = 0usize;
    let mut current: Option<usize> = None;
    let mut repaired_days = BTreeSet::new();
    let mut session_plan: Option<(usize, usize, Vec<f64>)> = None;

    let check_morning = |day: usize, soc: f64, at: usize, events: &mut Vec<SimEvent>| {
        if soc < config.morning_floor - 1e-9 {
            events.push(SimEvent {
                timestamp: series.timestamp(at),
                day,
                kind: EventKind::MorningShortfall {
                    floor: config.morning_floor,
                    soc,
                },
            });
        }
    };

    for i in first..clock_end {
        let pd = plugged_day(i);
        if pd != current {
            if let Some(prev) = current {
                check_morning(prev, soc, i, &mut events);
            }
            if let Some(d) = pd {
                while next_consumption <= d {
                    let requested = calendar.days[next_consumption].energy_kwh;
                    let available = ((soc - b.soc_min) / per_kwh).max(0.0);
                    if requested > available + 1e-12 {
                        events.push(SimEvent {
                            timestamp: series.timestamp(i),
                            day: next_consumption,
                            kind: EventKind::ConsumptionShortfall {
                                requested_kwh: requested,
                                available_kwh: available,
                            },
                        });
                        consumed += available;
                        soc = b.soc_min;
                    } else {
                        consumed += requested;
                        soc -= requested * per_kwh;
                    }
                    next_consumption += 1;
                }
            }
            current = pd;
        }

        let power = match (config.strategy, pd) {
            (_, None) => 0.0,
            (Strategy::Uncontrolled, Some(_)) => full_power_until_cap(&b, soc, dt),
            (Strategy::Mpc { .. }, Some(d)) => {
                let (pa, pe) = calendar.days[d].planned;
                if !(pa..pe).contains(&(i as i64)) {
                    0.0
                } else {
                    let cached = match (&session_plan, config.resolve) {
                        (Some((day, start, powers)), ResolveCadence::OncePerSession) if *day == d => {
                            powers.get(i - start).copied()
                        }
                        _ => None,
                    };
                    match cached {
                        Some(p) => p,
                        None => {
                            let plan = planner.plan(i, d, soc)?;
                            if let Some((session, required_soc, achievable_soc)) = plan.infeasible {
                                let day = d + session - 1;
                                if repaired_days.insert(day) {
                                    events.push(SimEvent {
                                        timestamp: series.timestamp(i),
                                        day,
                                        kind: EventKind::InfeasibleHorizon {
                                            session,
                                            required_soc,
                                            achievable_soc,
                                        },
                                    });
                                }
                            }
                            let p = plan.schedule.first_power();
                            session_plan = Some((d, i, plan.schedule.powers[0].clone()));
                            p
                        }
                    }
                }
            }
        };
        // guard the band against accumulated rounding
        let power = power.clamp(0.0, full_power_until_cap(&b, soc, dt));
        soc = (soc + power * dt * per_kwh).min(b.soc_max);
        let actual = series.actual()[i];
        log.push(StepRecord {
            timestamp: series.timestamp(i),
            plugged: pd.is_some(),
            session: pd,
            power,
            soc,
            actual_intensity: actual,
            emitted: power * dt * actual,
        });
    }
    if let Some(d) = current {
        if calendar.days[d].plugged.1 as usize <= clock_end {
            check_morning(d, soc, clock_end - 1, &mut events);
        }
    }

    let totals = compute_metrics(&log, dt)?;
    Ok(SimResult {
        strategy: config.strategy,
        seed: config.seed,
        initial_soc: config.initial_soc,
        log,
        totals,
        events,
        consumed_kwh: consumed,
        final_soc: soc,
    })
}
