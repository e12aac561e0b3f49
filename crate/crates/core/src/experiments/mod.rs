//! Scenario grids: the strategy comparison, the plug-window flexibility
//! sweep and the regional comparison, plus report emission.

mod report;
mod synthetic;

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::behavior::{ClockTime, FixedSchedule};
use crate::grid_data::CarbonSeries;
use crate::sim::{run, BehaviorSpec, ScenarioConfig, SimError, SimResult, Strategy};

pub use report::{sweep_matrix_csv, Report, ReportMeta, ReportRow};
pub use synthetic::SyntheticSignal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    StrategyTable,
    FlexibilitySweep,
    Regional,
}

/// Named window anchor for the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub name: String,
    pub center: ClockTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepAxes {
    pub lengths_hours: Vec<f64>,
    pub placements: Vec<Placement>,
    pub demands_kwh: Vec<f64>,
    pub horizon_days: usize,
}

impl Default for SweepAxes {
    fn default() -> Self {
        Self {
            lengths_hours: (2..=10).rev().map(|h| 2.0 * h as f64).collect(),
            placements: vec![
                Placement {
                    name: "overnight".into(),
                    center: ClockTime::hm(1, 0),
                },
                Placement {
                    name: "daytime".into(),
                    center: ClockTime::hm(13, 0),
                },
            ],
            demands_kwh: vec![5.0, 10.0, 20.0, 30.0],
            horizon_days: 4,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputPaths {
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    /// Sweep only: placement/demand x window-length matrix of c_ev.
    pub matrix_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// Scenario template; its strategy is replaced per row and its seed is
    /// the first replication seed.
    pub base: ScenarioConfig,
    #[serde(default = "default_horizons")]
    pub horizons: Vec<usize>,
    #[serde(default)]
    pub sweep: SweepAxes,
    #[serde(default = "default_regions")]
    pub regions: Vec<u16>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub outputs: OutputPaths,
}

fn default_horizons() -> Vec<usize> {
    vec![1, 2, 4, 7]
}

fn default_regions() -> Vec<u16> {
    (1..=14).collect()
}

fn default_replications() -> usize {
    5
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, base: ScenarioConfig) -> Self {
        let horizons = match kind {
            ExperimentKind::Regional => vec![1, 2, 4],
            _ => default_horizons(),
        };
        Self {
            kind,
            base,
            horizons,
            sweep: SweepAxes::default(),
            regions: default_regions(),
            replications: default_replications(),
            outputs: OutputPaths::default(),
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.replications as u64)
            .map(|r| self.base.seed.wrapping_add(r))
            .collect()
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::Spec(m.into()));
        if self.replications == 0 {
            return bad("replications must be >= 1");
        }
        match self.kind {
            ExperimentKind::StrategyTable if self.horizons.is_empty() => bad("horizon list is empty"),
            ExperimentKind::Regional if self.horizons.is_empty() || self.regions.is_empty() => {
                bad("regional runs need horizons and regions")
            }
            ExperimentKind::FlexibilitySweep
                if self.sweep.lengths_hours.is_empty()
                    || self.sweep.placements.is_empty()
                    || self.sweep.demands_kwh.is_empty() =>
            {
                bad("sweep axes must be non-empty")
            }
            _ if self.horizons.contains(&0) || self.sweep.horizon_days == 0 => bad("horizons must be >= 1"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment: {0}")]
    Spec(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Outcome of one scenario over all replication seeds.
struct Replicated {
    runs: Vec<SimResult>,
}

impl Replicated {
    fn mean(&self, f: impl Fn(&SimResult) -> f64) -> f64 {
        self.runs.iter().map(f).sum::<f64>() / self.runs.len() as f64
    }

    fn row(&self, scenario: &str, strategy: Strategy) -> ReportRow {
        let per_seed: Vec<f64> = self.runs.iter().filter_map(|r| r.totals.c_ev).collect();
        let energy = self.mean(|r| r.totals.energy_kwh);
        let emissions = self.mean(|r| r.totals.emissions_g);
        ReportRow {
            scenario: scenario.to_string(),
            strategy: strategy.label(),
            replications: self.runs.len(),
            energy_kwh: energy,
            emissions_g: emissions,
            c_ev: (energy > 0.0).then(|| emissions / energy),
            c_ev_min: per_seed.iter().copied().reduce(f64::min),
            c_ev_max: per_seed.iter().copied().reduce(f64::max),
            shortfall_count: self.runs.iter().map(SimResult::shortfall_count).sum(),
            ..ReportRow::default()
        }
    }
}

fn replicate(config: &ScenarioConfig, seeds: &[u64], series: &CarbonSeries) -> Result<Replicated, SimError> {
    let runs = seeds
        .par_iter()
        .map(|&seed| {
            let cfg = ScenarioConfig { seed, ..config.clone() };
            run(&cfg, series)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Replicated { runs })
}

/// Fills the reduction columns of every row from the matched uncontrolled
/// row of the same scenario.
fn attach_reductions(rows: &mut [ReportRow]) {
    let baselines: Vec<(String, Option<f64>)> = rows
        .iter()
        .filter(|r| r.strategy == Strategy::Uncontrolled.label())
        .map(|r| (r.scenario.clone(), r.c_ev))
        .collect();
    for row in rows.iter_mut() {
        let base = baselines.iter().find(|(s, _)| *s == row.scenario).and_then(|(_, c)| *c);
        row.uncontrolled_c_ev = base;
        if let (Some(c), Some(u)) = (row.c_ev, base) {
            if u > 0.0 {
                row.pct_reduction_vs_uncontrolled = Some(100.0 * (1.0 - c / u));
                row.abs_reduction = Some(u - c);
            }
        }
    }
}

fn strategies(horizons: &[usize]) -> Vec<Strategy> {
    std::iter::once(Strategy::Uncontrolled)
        .chain(horizons.iter().map(|&h| Strategy::Mpc { horizon_days: h }))
        .collect()
}

fn spec_json(spec: &ExperimentSpec) -> serde_json::Value {
    serde_json::to_value(spec).expect("spec is serializable")
}

/// Uncontrolled plus MPC(N) for each configured horizon on one series.
pub fn strategy_table(spec: &ExperimentSpec, series: &CarbonSeries) -> Result<Report, ExperimentError> {
    spec.validate()?;
    let seeds = spec.seeds();
    let label = series.region_name().to_string();
    let batches = strategies(&spec.horizons)
        .into_par_iter()
        .map(|strategy| {
            let cfg = ScenarioConfig {
                strategy,
                ..spec.base.clone()
            };
            replicate(&cfg, &seeds, series).map(|r| r.row(&label, strategy))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = batches;
    attach_reductions(&mut rows);
    Ok(Report::new(spec_json(spec), seeds, series.data_hash(), rows))
}

fn sweep_key(placement: &str, hours: f64, demand: f64) -> String {
    format!("{placement}/{hours:04.1}h/{demand:04.1}kWh")
}

/// MPC over fixed plug windows of varying length, placement and demand,
/// with a matched uncontrolled run per cell.
pub fn flexibility_sweep(spec: &ExperimentSpec, series: &CarbonSeries) -> Result<Report, ExperimentError> {
    spec.validate()?;
    let seeds = spec.seeds();
    let axes = &spec.sweep;
    let mut cells = Vec::new();
    for p in &axes.placements {
        for &hours in &axes.lengths_hours {
            for &demand in &axes.demands_kwh {
                cells.push((p.clone(), hours, demand));
            }
        }
    }
    let mpc = Strategy::Mpc {
        horizon_days: axes.horizon_days,
    };
    let step = series.grid().step_minutes();
    let rows: Vec<Vec<ReportRow>> = cells
        .par_iter()
        .map(|(placement, hours, demand)| {
            let key = sweep_key(&placement.name, *hours, *demand);
            let fixed = FixedSchedule {
                center: placement.center,
                length_hours: *hours,
                demand_kwh: *demand,
            };
            let labelled = |mut r: ReportRow| {
                r.placement = Some(placement.name.clone());
                r.window_hours = Some(*hours);
                r.demand_kwh = Some(*demand);
                r
            };
            if let Err(e) = fixed.window(step) {
                return Ok(vec![labelled(ReportRow {
                    scenario: key,
                    strategy: mpc.label(),
                    error: Some(e.to_string()),
                    ..ReportRow::default()
                })]);
            }
            let base = ScenarioConfig {
                behavior: BehaviorSpec::Fixed(fixed),
                ..spec.base.clone()
            };
            [Strategy::Uncontrolled, mpc]
                .into_iter()
                .map(|strategy| {
                    let cfg = ScenarioConfig {
                        strategy,
                        ..base.clone()
                    };
                    replicate(&cfg, &seeds, series).map(|r| labelled(r.row(&key, strategy)))
                })
                .collect::<Result<Vec<_>, SimError>>()
        })
        .collect::<Result<_, _>>()?;
    let mut rows: Vec<ReportRow> = rows.into_iter().flatten().collect();
    attach_reductions(&mut rows);
    Ok(Report::new(spec_json(spec), seeds, series.data_hash(), rows))
}

/// One entry per requested region: its name and either its series or the
/// reason it could not be loaded.
pub type RegionInput = (u16, String, Result<CarbonSeries, String>);

/// Uncontrolled and MPC(N) per region; a region whose data or run fails
/// yields a flagged row and the others proceed.
pub fn regional(spec: &ExperimentSpec, inputs: &[RegionInput]) -> Result<Report, ExperimentError> {
    spec.validate()?;
    let seeds = spec.seeds();
    let strategies = strategies(&spec.horizons);
    let per_region: Vec<Vec<ReportRow>> = inputs
        .par_iter()
        .map(|(id, name, data)| {
            let flagged = |e: String| {
                vec![ReportRow {
                    scenario: name.clone(),
                    region_id: Some(*id),
                    strategy: Strategy::Uncontrolled.label(),
                    error: Some(e),
                    ..ReportRow::default()
                }]
            };
            let series = match data {
                Ok(s) => s,
                Err(e) => return flagged(e.clone()),
            };
            let rows: Result<Vec<ReportRow>, SimError> = strategies
                .iter()
                .map(|&strategy| {
                    let cfg = ScenarioConfig {
                        strategy,
                        ..spec.base.clone()
                    };
                    replicate(&cfg, &seeds, series).map(|r| ReportRow {
                        region_id: Some(*id),
                        ..r.row(name, strategy)
                    })
                })
                .collect();
            rows.unwrap_or_else(|e| flagged(e.to_string()))
        })
        .collect();
    let mut rows: Vec<ReportRow> = per_region.into_iter().flatten().collect();
    attach_reductions(&mut rows);
    let hashes: Vec<String> = inputs
        .iter()
        .map(|(id, _, d)| format!("{id}:{}", d.as_ref().map_or("missing".into(), |s| s.data_hash())))
        .collect();
    Ok(Report::new(
        spec_json(spec),
        seeds,
        report::combined_hash(&hashes),
        rows,
    ))
}

/// Mean over the given rows of a column, skipping absent values.
pub fn mean_of(rows: &[&ReportRow], f: impl Fn(&ReportRow) -> Option<f64>) -> Option<f64> {
    let v: Vec<f64> = rows.iter().filter_map(|r| f(r)).collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

#[cfg(test)]
mod tests {
    use chrono::Duration;

    use super::*;
    use crate::sim::two_night_toy;

    fn short_spec(kind: ExperimentKind, series: &CarbonSeries, days: i64) -> ExperimentSpec {
        let base = ScenarioConfig::new(
            Strategy::Uncontrolled,
            series.start(),
            series.start() + Duration::days(days),
        );
        let mut spec = ExperimentSpec::new(kind, base);
        spec.replications = 2;
        spec
    }

    #[test]
    fn toy_reduction_between_horizons() {
        let (series, base) = two_night_toy(Strategy::Uncontrolled);
        let mut spec = ExperimentSpec::new(ExperimentKind::StrategyTable, base);
        spec.horizons = vec![1, 2];
        spec.replications = 1;
        let report = strategy_table(&spec, &series).unwrap();
        let m1 = report.row("toy", "mpc1").unwrap();
        let m2 = report.row("toy", "mpc2").unwrap();
        assert_eq!(m1.emissions_g, 1450.0);
        assert_eq!(m2.emissions_g, 925.0);
        let rel = 100.0 * (1.0 - m2.emissions_g / m1.emissions_g);
        assert!((rel - 36.2).abs() < 0.05, "{rel}");
    }

    #[test]
    fn flat_signal_has_no_reduction() {
        let series = CarbonSeries::new(
            0,
            "flat",
            "2022-01-01T00:00:00Z".parse().unwrap(),
            vec![150.0; 48 * 12],
            None,
        )
        .unwrap();
        let mut spec = short_spec(ExperimentKind::StrategyTable, &series, 9);
        spec.base.perfect_forecast = true;
        let report = strategy_table(&spec, &series).unwrap();
        for row in &report.rows {
            assert!(row.pct_reduction_vs_uncontrolled.unwrap().abs() < 1e-9, "{row:?}");
        }
    }

    #[test]
    fn rows_recompute_from_their_fields() {
        let series = SyntheticSignal {
            days: 20,
            ..Default::default()
        }
        .series()
        .unwrap();
        let spec = short_spec(ExperimentKind::StrategyTable, &series, 14);
        let report = strategy_table(&spec, &series).unwrap();
        let unc = report.row("synthetic", "uncontrolled").unwrap().clone();
        assert_eq!(report.rows.len(), 5);
        for row in &report.rows {
            assert_eq!(row.c_ev, Some(row.emissions_g / row.energy_kwh));
            let expect = 100.0 * (1.0 - row.c_ev.unwrap() / unc.c_ev.unwrap());
            assert_eq!(row.pct_reduction_vs_uncontrolled, Some(expect));
        }
    }

    #[test]
    fn sweep_flags_impossible_cells_and_builds_matrix() {
        let series = SyntheticSignal {
            days: 12,
            ..Default::default()
        }
        .series()
        .unwrap();
        let mut spec = short_spec(ExperimentKind::FlexibilitySweep, &series, 7);
        spec.replications = 1;
        spec.sweep.lengths_hours = vec![8.0, 0.2];
        spec.sweep.demands_kwh = vec![5.0, 45.0];
        spec.sweep.horizon_days = 2;
        let report = flexibility_sweep(&spec, &series).unwrap();
        let empty: Vec<_> = report.rows.iter().filter(|r| r.error.is_some()).collect();
        assert_eq!(empty.len(), 4);
        let heavy = report
            .rows
            .iter()
            .find(|r| r.strategy == "mpc2" && r.demand_kwh == Some(45.0) && r.window_hours == Some(8.0))
            .unwrap();
        assert!(heavy.shortfall_count > 0);
        let matrix = sweep_matrix_csv(&report, &spec.sweep);
        let lines: Vec<&str> = matrix.lines().collect();
        assert_eq!(lines[0], "placement,demand_kwh,8h,0.2h");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].ends_with(','), "{}", lines[1]);
    }

    #[test]
    fn regional_isolates_broken_regions() {
        let series = SyntheticSignal {
            days: 10,
            ..Default::default()
        }
        .series()
        .unwrap();
        let mut spec = short_spec(ExperimentKind::Regional, &series, 6);
        spec.replications = 1;
        let short = series
            .slice(series.start(), series.start() + Duration::days(3))
            .unwrap();
        let inputs = vec![
            (1, "North Scotland".to_string(), Ok(series.clone())),
            (2, "South Scotland".to_string(), Err("HTTP 500".to_string())),
            (3, "North West England".to_string(), Ok(short)),
        ];
        let report = regional(&spec, &inputs).unwrap();
        assert_eq!(report.rows.iter().filter(|r| r.scenario == "North Scotland").count(), 4);
        let broken: Vec<_> = report.rows.iter().filter(|r| r.error.is_some()).collect();
        assert_eq!(broken.len(), 2);
    }

    #[test]
    fn reports_are_byte_identical_across_runs() {
        let series = SyntheticSignal {
            days: 12,
            ..Default::default()
        }
        .series()
        .unwrap();
        let mut spec = short_spec(ExperimentKind::StrategyTable, &series, 8);
        spec.horizons = vec![1, 2];
        let a = strategy_table(&spec, &series).unwrap();
        let b = strategy_table(&spec, &series).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn spec_validation_and_toml() {
        let series = SyntheticSignal {
            days: 3,
            ..Default::default()
        }
        .series()
        .unwrap();
        let mut spec = short_spec(ExperimentKind::FlexibilitySweep, &series, 2);
        let text = toml::to_string(&spec).unwrap();
        let back: ExperimentSpec = toml::from_str(&text).unwrap();
        assert_eq!(back, spec);
        spec.sweep.demands_kwh.clear();
        assert!(spec.validate().is_err());
        spec.sweep = SweepAxes::default();
        spec.replications = 0;
        assert!(spec.validate().is_err());
    }
}
