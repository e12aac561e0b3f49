use serde::{Deserialize, Serialize};

use super::{SimError, StepRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTotals {
    pub day: usize,
    pub energy_kwh: f64,
    pub emissions_g: f64,
    pub c_ev: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub energy_kwh: f64,
    pub emissions_g: f64,
    /// gCO2e per kWh charged; absent when nothing was charged.
    pub c_ev: Option<f64>,
    /// Running emissions after each logged interval.
    pub cumulative_emissions_g: Vec<f64>,
    pub sessions: Vec<SessionTotals>,
}

fn intensity_per_kwh(emissions: f64, energy: f64) -> Option<f64> {
    (energy > 0.0).then(|| emissions / energy)
}

/// Aggregates a step log recorded at `delta_t_hours` resolution.
pub fn compute_metrics(log: &[StepRecord], delta_t_hours: f64) -> Result<Totals, SimError> {
    if log.is_empty() {
        return Err(SimError::EmptyLog);
    }
    let mut energy = 0.0;
    let mut emissions = 0.0;
    let mut cumulative = Vec::with_capacity(log.len());
    let mut sessions: Vec<SessionTotals> = Vec::new();
    for r in log {
        let e = r.power * delta_t_hours;
        let g = e * r.actual_intensity;
        energy += e;
        emissions += g;
        cumulative.push(emissions);
        if let Some(day) = r.session {
            match sessions.last_mut() {
                Some(s) if s.day == day => {
                    s.energy_kwh += e;
                    s.emissions_g += g;
                }
                _ => sessions.push(SessionTotals {
                    day,
                    energy_kwh: e,
                    emissions_g: g,
                    c_ev: None,
                }),
            }
        }
    }
    for s in &mut sessions {
        s.c_ev = intensity_per_kwh(s.emissions_g, s.energy_kwh);
    }
    Ok(Totals {
        energy_kwh: energy,
        emissions_g: emissions,
        c_ev: intensity_per_kwh(emissions, energy),
        cumulative_emissions_g: cumulative,
        sessions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(power: f64, intensity: f64, session: Option<usize>) -> StepRecord {
        StepRecord {
            timestamp: "2023-01-01T00:00:00Z".parse().unwrap(),
            plugged: session.is_some(),
            session,
            power,
            soc: 50.0,
            actual_intensity: intensity,
            emitted: power * 0.5 * intensity,
        }
    }

    #[test]
    fn single_full_power_step() {
        let t = compute_metrics(&[step(10.0, 200.0, Some(0))], 0.5).unwrap();
        assert_eq!(t.energy_kwh, 5.0);
        assert_eq!(t.emissions_g, 1000.0);
        assert_eq!(t.c_ev, Some(200.0));
    }

    #[test]
    fn zero_power_has_no_intensity() {
        let t = compute_metrics(&[step(0.0, 200.0, None), step(0.0, 100.0, Some(1))], 0.5).unwrap();
        assert_eq!(t.energy_kwh, 0.0);
        assert_eq!(t.emissions_g, 0.0);
        assert_eq!(t.c_ev, None);
        assert_eq!(t.sessions[0].c_ev, None);
    }

    #[test]
    fn ratio_of_totals() {
        // 2.5 kWh at 40 g plus 7.5 kWh at 120 g: 1000 g over 10 kWh.
        let log = [step(5.0, 40.0, Some(0)), step(15.0, 120.0, Some(0))];
        let t = compute_metrics(&log, 0.5).unwrap();
        assert!((t.emissions_g - 1000.0).abs() < 1e-12);
        assert_eq!(t.c_ev, Some(100.0));
        assert_eq!(t.cumulative_emissions_g, vec![100.0, 1000.0]);
    }

    #[test]
    fn per_session_breakdown() {
        let log = [
            step(10.0, 100.0, Some(0)),
            step(0.0, 1.0, None),
            step(10.0, 300.0, Some(1)),
        ];
        let t = compute_metrics(&log, 0.5).unwrap();
        assert_eq!(t.sessions.len(), 2);
        assert_eq!(t.sessions[1].day, 1);
        assert_eq!(t.sessions[1].emissions_g, 1500.0);
    }

    #[test]
    fn empty_log_is_an_error() {
        assert!(matches!(compute_metrics(&[], 0.5), Err(SimError::EmptyLog)));
    }
}
