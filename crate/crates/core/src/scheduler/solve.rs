use std::cmp::Ordering;
use std::collections::BTreeMap;

use super::{HorizonProblem, Infeasibility, PowerSchedule, SolveError};

/// SOC slack (percentage points) below which a requirement counts as met.
const SOC_EPS: f64 = 1e-10;

/// Intensity ordered by `total_cmp` so it can key a `BTreeMap`.
#[derive(Debug, Clone, Copy)]
struct Intensity(f64);

impl PartialEq for Intensity {
    fn eq(&self, other: &Self) -> bool {
        self.0.total_cmp(&other.0) == Ordering::Equal
    }
}
impl Eq for Intensity {}
impl PartialOrd for Intensity {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Intensity {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Charging capacity not yet committed, keyed by (intensity, interval order).
///
/// Walking the pool from the front visits the cheapest remaining SOC gain;
/// the back holds capacity that an upper SOC bound can discard. Within equal
/// intensities the earlier interval sorts first, so it is committed first and
/// discarded last.
#[derive(Default)]
struct CapacityPool {
    entries: BTreeMap<(Intensity, usize), f64>,
    total: f64,
}

impl CapacityPool {
    fn insert(&mut self, intensity: f64, order: usize, soc: f64) {
        if soc > 0.0 {
            self.entries.insert((Intensity(intensity), order), soc);
            self.total += soc;
        }
    }

    /// Drop `amount` SOC points of the most expensive capacity.
    fn discard_top(&mut self, mut amount: f64) {
        while amount > 0.0 {
            let Some(mut entry) = self.entries.last_entry() else {
                self.total = 0.0;
                return;
            };
            let cap = *entry.get();
            if cap <= amount {
                entry.remove();
                self.total -= cap;
                amount -= cap;
            } else {
                *entry.get_mut() = cap - amount;
                self.total -= amount;
                amount = 0.0;
            }
        }
        if self.entries.is_empty() {
            self.total = 0.0;
        }
    }

    /// Commit up to `amount` SOC points of the cheapest capacity; returns the
    /// amount actually committed.
    fn commit_cheapest(&mut self, amount: f64, allocation: &mut [f64]) -> f64 {
        let mut committed = 0.0;
        while amount - committed > SOC_EPS {
            let Some(mut entry) = self.entries.first_entry() else {
                break;
            };
            let order = entry.key().1;
            let cap = *entry.get();
            let take = cap.min(amount - committed);
            allocation[order] += take;
            committed += take;
            self.total -= take;
            if cap - take <= 0.0 {
                entry.remove();
            } else {
                *entry.get_mut() = cap - take;
            }
        }
        if self.entries.is_empty() {
            self.total = 0.0;
        }
        committed
    }
}

/// Globally minimal net-carbon schedule.
///
/// SOC only rises inside a session, so the SOC box binds at session ends
/// (cap) and session starts (floor after the day's consumption). Under those
/// session-level constraints the minimum cost as a function of end-of-session
/// SOC is convex piecewise linear, and the curve for session `s` is the
/// infimal convolution of the curve for `s-1` with the sorted intensities of
/// session `s`, clipped to the feasible SOC range. Clipping from above drops
/// the most expensive capacity; clipping from below commits the cheapest. The
/// optimum sits at the left end of the final curve (intensities are
/// non-negative), which is exactly the committed capacity.
pub fn solve(problem: &HorizonProblem) -> Result<PowerSchedule, SolveError> {
    problem.validate()?;
    let battery = problem.battery;
    let step = problem.max_soc_step();
    let n = problem.sessions.len();

    let mut offsets = Vec::with_capacity(n);
    let mut total = 0;
    for session in &problem.sessions {
        offsets.push(total);
        total += session.len();
    }

    let mut allocation = vec![0.0; total];
    let mut pool = CapacityPool::default();
    let mut soc = problem.soc0;

    for (s, session) in problem.sessions.iter().enumerate() {
        if s > 0 {
            soc -= problem.demand_soc(s - 1);
        }
        for (k, &c) in session.intensities.iter().enumerate() {
            pool.insert(c, offsets[s] + k, step);
        }

        let upper = battery.soc_max;
        let lower = if s + 1 < n {
            problem.morning_floors[s].max(battery.soc_min + problem.demand_soc(s))
        } else {
            problem.morning_floors[s]
        };
        if lower > upper + SOC_EPS {
            return Err(SolveError::Infeasible(Infeasibility {
                session: s + 1,
                required_soc: lower,
                achievable_soc: (soc + pool.total).min(upper),
            }));
        }

        let excess = soc + pool.total - upper;
        if excess > 0.0 {
            pool.discard_top(excess);
        }

        let needed = lower - soc;
        if needed > SOC_EPS {
            let reachable = soc + pool.total;
            let got = pool.commit_cheapest(needed, &mut allocation);
            soc += got;
            if lower - soc > SOC_EPS {
                return Err(SolveError::Infeasible(Infeasibility {
                    session: s + 1,
                    required_soc: lower,
                    achievable_soc: reachable,
                }));
            }
        }
    }

    let to_power = battery.capacity_kwh / (100.0 * problem.delta_t_hours);
    let powers = problem
        .sessions
        .iter()
        .enumerate()
        .map(|(s, session)| {
            (0..session.len())
                .map(|k| (allocation[offsets[s] + k] * to_power).clamp(0.0, battery.max_power_kw))
                .collect()
        })
        .collect();
    Ok(PowerSchedule::from_powers(problem, powers))
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::{single_session, two_nights};
    use super::super::{BatteryParams, SessionWindow};
    use super::*;

    #[test]
    fn single_session_picks_two_cheapest_intervals() {
        let s = solve(&single_session()).unwrap();
        assert_eq!(s.powers, vec![vec![0.0, 10.0, 0.0, 10.0]]);
        assert!((s.predicted_cost - 1250.0).abs() < 1e-9);
        assert!((s.predicted_soc[0][4] - 60.0).abs() < 1e-9);
    }

    #[test]
    fn two_nights_precharges_on_the_cheap_night() {
        let s = solve(&two_nights()).unwrap();
        assert_eq!(s.powers, vec![vec![10.0, 10.0], vec![0.0, 0.0]]);
        assert!((s.predicted_cost - 925.0).abs() < 1e-9);

        // the same instance solved one night at a time
        let mut night1 = two_nights();
        night1.sessions.truncate(1);
        night1.morning_floors.truncate(1);
        night1.demands_kwh.clear();
        let first = solve(&night1).unwrap();
        let mut night2 = two_nights();
        night2.sessions.remove(0);
        night2.morning_floors.remove(0);
        night2.demands_kwh.clear();
        night2.soc0 = first.predicted_soc[0].last().unwrap() - 10.0;
        let second = solve(&night2).unwrap();
        assert!((first.predicted_cost + second.predicted_cost - 1450.0).abs() < 1e-9);
    }

    #[test]
    fn zero_demand_above_floor_is_free() {
        let p = HorizonProblem {
            sessions: vec![
                SessionWindow::new(0, vec![100.0; 4]),
                SessionWindow::new(48, vec![50.0; 4]),
            ],
            demands_kwh: vec![0.0],
            soc0: 55.0,
            morning_floors: vec![50.0, 50.0],
            battery: BatteryParams::default(),
            delta_t_hours: 0.5,
        };
        let s = solve(&p).unwrap();
        assert!(s.powers.iter().flatten().all(|p| *p == 0.0));
        assert_eq!(s.predicted_cost, 0.0);
    }

    #[test]
    fn equal_intensities_charge_earliest_first() {
        let p = HorizonProblem {
            sessions: vec![SessionWindow::new(0, vec![100.0; 4])],
            demands_kwh: vec![],
            soc0: 40.0,
            morning_floors: vec![55.0],
            battery: BatteryParams::default(),
            delta_t_hours: 0.5,
        };
        let s = solve(&p).unwrap();
        assert_eq!(s.powers[0], vec![10.0, 5.0, 0.0, 0.0]);
    }

    #[test]
    fn cap_limits_precharging() {
        // cheap night 1 but cap 80 stops it from absorbing all of night 2's need
        let p = HorizonProblem {
            sessions: vec![
                SessionWindow::new(0, vec![10.0; 8]),
                SessionWindow::new(48, vec![500.0; 8]),
            ],
            demands_kwh: vec![20.0],
            soc0: 40.0,
            morning_floors: vec![50.0, 70.0],
            battery: BatteryParams::default(),
            delta_t_hours: 0.5,
        };
        let s = solve(&p).unwrap();
        assert!((s.predicted_soc[0].last().unwrap() - 80.0).abs() < 1e-9);
        assert!((s.predicted_soc[1].last().unwrap() - 70.0).abs() < 1e-9);
        assert!((s.total_energy_kwh(0.5) - 35.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_floor_reports_session() {
        let p = HorizonProblem {
            sessions: vec![SessionWindow::new(0, vec![100.0, 100.0])],
            demands_kwh: vec![],
            soc0: 40.0,
            morning_floors: vec![70.0],
            battery: BatteryParams::default(),
            delta_t_hours: 0.5,
        };
        match solve(&p) {
            Err(SolveError::Infeasible(info)) => {
                assert_eq!(info.session, 1);
                assert_eq!(info.required_soc, 70.0);
                assert!((info.achievable_soc - 60.0).abs() < 1e-9);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn demand_beyond_band_is_infeasible() {
        let p = HorizonProblem {
            sessions: vec![
                SessionWindow::new(0, vec![1.0; 20]),
                SessionWindow::new(48, vec![1.0; 20]),
            ],
            demands_kwh: vec![31.0],
            soc0: 50.0,
            morning_floors: vec![50.0, 50.0],
            battery: BatteryParams::default(),
            delta_t_hours: 0.5,
        };
        assert!(matches!(
            solve(&p),
            Err(SolveError::Infeasible(Infeasibility { session: 1, .. }))
        ));
    }
}
