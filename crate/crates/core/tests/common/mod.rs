#![allow(dead_code)]

use carbon_sched::scheduler::{BatteryParams, HorizonProblem, SessionWindow};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Instance whose floors, demands and SOC0 are whole multiples of one
/// full-power interval (10 SOC points with the default battery and 0.5 h).
pub fn quantized_instance(rng: &mut ChaCha8Rng, max_intervals: usize) -> HorizonProblem {
    let battery = BatteryParams::default();
    let sessions_n = rng.random_range(1..=3usize);
    let mut lengths: Vec<usize> = (0..sessions_n).map(|_| rng.random_range(1..=6usize)).collect();
    while lengths.iter().sum::<usize>() > max_intervals {
        let i = rng.random_range(0..lengths.len());
        if lengths[i] > 1 {
            lengths[i] -= 1;
        } else if lengths.len() > 1 {
            lengths.remove(i);
        }
    }
    let mut sessions = Vec::new();
    let mut offset = rng.random_range(0..4usize);
    for len in &lengths {
        let intensities = (0..*len).map(|_| rng.random_range(0..40u32) as f64 * 10.0).collect();
        sessions.push(SessionWindow::new(offset, intensities));
        offset += len + rng.random_range(1..30usize);
    }
    let n = sessions.len();
    let soc0 = 10.0 * rng.random_range(2..=8u32) as f64;
    let morning_floors = (0..n).map(|_| 10.0 * rng.random_range(2..=8u32) as f64).collect();
    let demands_kwh = (0..n.saturating_sub(1))
        .map(|_| 5.0 * rng.random_range(0..=4u32) as f64)
        .collect();
    HorizonProblem {
        sessions,
        demands_kwh,
        soc0,
        morning_floors,
        battery,
        delta_t_hours: 0.5,
    }
}

/// Larger instance with continuous data, biased towards feasibility.
pub fn continuous_instance(rng: &mut ChaCha8Rng) -> HorizonProblem {
    let battery = BatteryParams {
        capacity_kwh: rng.random_range(30.0..90.0),
        max_power_kw: rng.random_range(3.0..11.0),
        soc_min: rng.random_range(10.0..25.0),
        soc_max: rng.random_range(75.0..95.0),
    };
    let n = rng.random_range(1..=7usize);
    let mut sessions = Vec::new();
    let mut offset = rng.random_range(0..10usize);
    for _ in 0..n {
        let len = rng.random_range(1..=24usize);
        let base = rng.random_range(20.0..400.0);
        let intensities = (0..len)
            .map(|_| (base + rng.random_range(-150.0..150.0f64)).max(0.0))
            .collect();
        sessions.push(SessionWindow::new(offset, intensities));
        offset += len + rng.random_range(4..30usize);
    }
    let soc0 = rng.random_range(battery.soc_min..battery.soc_max);
    let floor_hi = battery.soc_min + 0.6 * (battery.soc_max - battery.soc_min);
    let morning_floors = (0..n).map(|_| rng.random_range(battery.soc_min..floor_hi)).collect();
    let demands_kwh = (0..n - 1)
        .map(|_| rng.random_range(0.0..0.3 * battery.capacity_kwh))
        .collect();
    HorizonProblem {
        sessions,
        demands_kwh,
        soc0,
        morning_floors,
        battery,
        delta_t_hours: 0.5,
    }
}

/// Solve each session on its own (N = 1) and chain the SOC; returns the
/// summed predicted cost when every session is feasible.
pub fn per_session_cost(problem: &HorizonProblem) -> Option<(f64, Vec<Vec<f64>>)> {
    let per_kwh = problem.battery.soc_per_kwh();
    let n = problem.sessions.len();
    let mut soc = problem.soc0;
    let mut total = 0.0;
    let mut powers = Vec::new();
    for s in 0..n {
        if s > 0 {
            soc -= problem.demands_kwh[s - 1] * per_kwh;
        }
        let floor = if s + 1 < n {
            problem.morning_floors[s].max(problem.battery.soc_min + problem.demands_kwh[s] * per_kwh)
        } else {
            problem.morning_floors[s]
        };
        if floor > problem.battery.soc_max || soc < problem.battery.soc_min - 1e-9 {
            return None;
        }
        let single = HorizonProblem {
            sessions: vec![SessionWindow::new(0, problem.sessions[s].intensities.clone())],
            demands_kwh: vec![],
            soc0: soc.max(problem.battery.soc_min),
            morning_floors: vec![floor],
            battery: problem.battery,
            delta_t_hours: problem.delta_t_hours,
        };
        let sched = carbon_sched::solve(&single).ok()?;
        total += sched.predicted_cost;
        soc = *sched.predicted_soc[0].last().unwrap();
        powers.push(sched.powers[0].clone());
    }
    Some((total, powers))
}

/// Independent re-simulation of a power plan: returns the list of
/// constraint violations (empty when feasible).
pub fn violations(problem: &HorizonProblem, powers: &[Vec<f64>], reported_soc: &[Vec<f64>], tol: f64) -> Vec<String> {
    let b = problem.battery;
    let mut out = Vec::new();
    let mut soc = problem.soc0;
    for s in 0..problem.sessions.len() {
        if s > 0 {
            soc -= problem.demands_kwh[s - 1] * 100.0 / b.capacity_kwh;
        }
        let check = |soc: f64, where_: String, out: &mut Vec<String>| {
            if soc < b.soc_min - tol || soc > b.soc_max + tol {
                out.push(format!("SOC {soc} out of band at {where_}"));
            }
        };
        check(soc, format!("s{} start", s + 1), &mut out);
        if (reported_soc[s][0] - soc).abs() > tol {
            out.push(format!("trajectory mismatch s{} k0", s + 1));
        }
        for (k, p) in powers[s].iter().enumerate() {
            if *p < -tol || *p > b.max_power_kw + tol {
                out.push(format!("power {p} out of box at s{} k{}", s + 1, k + 1));
            }
            soc += p * problem.delta_t_hours * 100.0 / b.capacity_kwh;
            check(soc, format!("s{} k{}", s + 1, k + 1), &mut out);
            if (reported_soc[s][k + 1] - soc).abs() > tol {
                out.push(format!("trajectory mismatch s{} k{}", s + 1, k + 1));
            }
        }
        if soc < problem.morning_floors[s] - tol {
            out.push(format!(
                "floor {} missed at s{} ({soc})",
                problem.morning_floors[s],
                s + 1
            ));
        }
    }
    out
}
