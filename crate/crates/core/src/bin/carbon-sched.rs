use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use carbon_sched::behavior::{ClockTime, FixedSchedule};
use carbon_sched::experiments::{
    self, sweep_matrix_csv, ExperimentKind, ExperimentSpec, Placement, RegionInput, Report, ReportMeta, SyntheticSignal,
};
use carbon_sched::forecast::EpsMode;
use carbon_sched::grid_data::{
    parse_carbon_csv, CarbonApiClient, CarbonSeries, GapFill, IngestOptions, RegionRegistry, RegionSelector,
    DEFAULT_BASE_URL,
};
use carbon_sched::sim::{self, BehaviorSpec, ResolveCadence, ScenarioConfig, Strategy};
use chrono::{DateTime, NaiveDate, Utc};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "carbon-sched",
    version,
    about = "Carbon-aware EV charging scheduler and simulator"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct GlobalOpts {
    /// TOML file with scenario / experiment fields; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Forecast error growth per interval of lead time.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true, value_parser = parse_eps_mode)]
    eps_mode: Option<EpsMode>,
    /// One-step relative error used where no stored forecast exists.
    #[arg(long, global = true)]
    fallback_eps: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Plan against measured intensities instead of synthetic forecasts.
    #[arg(long, global = true)]
    perfect_forecast: bool,
    /// Minimum SOC (%) wanted at every plug-out.
    #[arg(long, global = true)]
    morning_floor: Option<f64>,
    #[arg(long, global = true)]
    initial_soc: Option<f64>,
    /// Re-solve cadence: `step` or `session`.
    #[arg(long, global = true, value_parser = parse_resolve)]
    resolve: Option<ResolveCadence>,
    /// Response cache for API downloads.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Interpolate CSV gaps of up to N intervals instead of rejecting them.
    #[arg(long, global = true)]
    fill_gaps: Option<usize>,
}

#[derive(Args, Clone)]
struct RangeOpts {
    /// First day (YYYY-MM-DD or RFC 3339); defaults to the data start.
    #[arg(long)]
    from: Option<String>,
    /// Exclusive end; defaults to the last midnight in the data.
    #[arg(long)]
    to: Option<String>,
}

#[derive(Args, Clone)]
struct ReportOut {
    #[arg(long)]
    out_json: Option<PathBuf>,
    #[arg(long)]
    out_csv: Option<PathBuf>,
    /// Independent runs per cell, seeds `seed, seed+1, ...`.
    #[arg(long)]
    replications: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Download a series from the carbon-intensity API to canonical CSV.
    Fetch {
        /// Region id or `national`.
        #[arg(long, default_value = "national")]
        region: String,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = DEFAULT_BASE_URL)]
        base_url: String,
    },
    /// Run one scenario and write its totals (and optionally the step log).
    Simulate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "mpc")]
        strategy: String,
        #[arg(long)]
        horizon: Option<usize>,
        #[command(flatten)]
        range: RangeOpts,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        log_csv: Option<PathBuf>,
        /// Fixed plug window centre (HH:MM) instead of sampled behaviour.
        #[arg(long, requires = "window_hours")]
        window_center: Option<String>,
        #[arg(long, requires = "window_center")]
        window_hours: Option<f64>,
        /// Daily demand for the fixed window, kWh.
        #[arg(long, default_value_t = 10.0)]
        demand: f64,
    },
    /// Uncontrolled versus MPC(N) over a list of horizons.
    Table1 {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        range: RangeOpts,
        #[arg(long, value_delimiter = ',')]
        horizons: Option<Vec<usize>>,
        #[command(flatten)]
        out: ReportOut,
    },
    /// Plug-window length x placement x demand grid under MPC.
    Sweep {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        range: RangeOpts,
        #[arg(long, value_delimiter = ',')]
        lengths: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        demands: Option<Vec<f64>>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        overnight_center: Option<String>,
        #[arg(long)]
        daytime_center: Option<String>,
        #[command(flatten)]
        out: ReportOut,
        #[arg(long)]
        out_matrix: Option<PathBuf>,
    },
    /// Per-region comparison; series come from `<data-dir>/<id>.csv` or the API.
    Regional {
        #[arg(long, value_delimiter = ',')]
        regions: Option<Vec<u16>>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Download regions missing from the data directory.
        #[arg(long)]
        fetch: bool,
        #[arg(long, default_value = DEFAULT_BASE_URL)]
        base_url: String,
        /// Region registry TOML overriding the built-in one.
        #[arg(long)]
        registry: Option<PathBuf>,
        #[command(flatten)]
        range: RangeOpts,
        #[arg(long, value_delimiter = ',')]
        horizons: Option<Vec<usize>>,
        #[command(flatten)]
        out: ReportOut,
    },
    /// Write the pseudo-periodic synthetic signal as canonical CSV.
    Synth {
        #[arg(long, default_value = "2022-01-01")]
        start: String,
        #[arg(long, default_value_t = 365)]
        days: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_eps_mode(s: &str) -> Result<EpsMode, String> {
    s.parse()
}

fn parse_resolve(s: &str) -> Result<ResolveCadence, String> {
    s.parse()
}

fn parse_instant(raw: &str) -> Result<DateTime<Utc>> {
    if let Ok(d) = NaiveDate::parse_from_str(raw, "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).expect("midnight").and_utc());
    }
    DateTime::parse_from_rfc3339(raw)
        .map(|d| d.with_timezone(&Utc))
        .with_context(|| format!("`{raw}` is neither YYYY-MM-DD nor RFC 3339"))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_series(path: &Path, global: &GlobalOpts, region_id: u16, name: &str) -> Result<CarbonSeries> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let options = IngestOptions {
        region_id,
        region_name: name.to_string(),
        fill: global
            .fill_gaps
            .map_or(GapFill::Reject, |max_missing| GapFill::Linear { max_missing }),
        ..IngestOptions::default()
    };
    parse_carbon_csv(&bytes, &options).with_context(|| format!("parsing {}", path.display()))
}

fn series_label(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "series".to_string(), |s| s.to_string_lossy().into_owned())
}

/// Default range: whole days covered by the series.
fn default_range(series: &CarbonSeries) -> (DateTime<Utc>, DateTime<Utc>) {
    let day = |t: DateTime<Utc>, up: bool| {
        let s = t.timestamp();
        let d = if up {
            (s + 86_399).div_euclid(86_400)
        } else {
            s.div_euclid(86_400)
        };
        DateTime::from_timestamp(d * 86_400, 0).expect("in range")
    };
    (day(series.start(), true), day(series.end(), false))
}

fn merge_toml(base: &mut toml::Value, overlay: toml::Value) {
    match (base, overlay) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(existing) => merge_toml(existing, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

/// Defaults, then the config file, then flags.
fn build_spec(
    kind: ExperimentKind,
    global: &GlobalOpts,
    range: Option<(&RangeOpts, &CarbonSeries)>,
) -> Result<ExperimentSpec> {
    let (from, to) = match range {
        Some((_, s)) => default_range(s),
        None => (DateTime::UNIX_EPOCH, DateTime::UNIX_EPOCH + chrono::Duration::days(1)),
    };
    let mut spec = ExperimentSpec::new(kind, ScenarioConfig::new(Strategy::Uncontrolled, from, to));
    if let Some(path) = &global.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let file: toml::Value = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let mut merged = toml::Value::try_from(&spec)?;
        merge_toml(&mut merged, file);
        if let Some(t) = merged.as_table_mut() {
            t.insert("kind".into(), toml::Value::try_from(kind)?);
        }
        spec = merged
            .try_into()
            .with_context(|| format!("config {}", path.display()))?;
    }
    let base = &mut spec.base;
    if let Some((r, _)) = range {
        if let Some(f) = &r.from {
            base.from = parse_instant(f)?;
        }
        if let Some(t) = &r.to {
            base.to = parse_instant(t)?;
        }
    }
    if let Some(v) = global.lambda {
        base.forecast.lambda = v;
    }
    if let Some(v) = global.eps_mode {
        base.forecast.eps_mode = v;
    }
    if let Some(v) = global.fallback_eps {
        base.forecast.fallback_rel_error = v;
    }
    if let Some(v) = global.seed {
        base.seed = v;
    }
    if global.perfect_forecast {
        base.perfect_forecast = true;
    }
    if let Some(v) = global.morning_floor {
        base.morning_floor = v;
    }
    if let Some(v) = global.initial_soc {
        base.initial_soc = v;
    }
    if let Some(v) = global.resolve {
        base.resolve = v;
    }
    Ok(spec)
}

fn apply_report_opts(spec: &mut ExperimentSpec, out: &ReportOut) {
    if let Some(r) = out.replications {
        spec.replications = r;
    }
    if out.out_json.is_some() {
        spec.outputs.json = out.out_json.clone();
    }
    if out.out_csv.is_some() {
        spec.outputs.csv = out.out_csv.clone();
    }
}

fn emit_report(spec: &ExperimentSpec, report: &Report) -> Result<()> {
    if spec.outputs.json.is_none() && spec.outputs.csv.is_none() {
        return write_output(None, &report.to_json());
    }
    if let Some(p) = &spec.outputs.json {
        write_output(Some(p), &report.to_json())?;
    }
    if let Some(p) = &spec.outputs.csv {
        write_output(Some(p), &report.to_csv())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulateOutput<'a> {
    meta: ReportMeta,
    strategy: Strategy,
    seed: u64,
    energy_kwh: f64,
    emissions_g: f64,
    c_ev: Option<f64>,
    consumed_kwh: f64,
    final_soc: f64,
    sessions: &'a [sim::SessionTotals],
    events: &'a [sim::SimEvent],
}

fn api_client(global: &GlobalOpts, base_url: &str) -> CarbonApiClient {
    CarbonApiClient::new(base_url).with_cache_dir(global.cache_dir.clone())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let global = &cli.global;
    match &cli.command {
        Command::Fetch {
            region,
            from,
            to,
            out,
            base_url,
        } => {
            let selector = RegionSelector::parse(region)?;
            let series =
                api_client(global, base_url).fetch_region(selector, parse_instant(from)?, parse_instant(to)?)?;
            write_output(Some(out), &series.to_csv())?;
            eprintln!("wrote {} intervals to {}", series.len(), out.display());
        }
        Command::Simulate {
            data,
            strategy,
            horizon,
            range,
            out,
            log_csv,
            window_center,
            window_hours,
            demand,
        } => {
            let series = load_series(data, global, 0, &series_label(data))?;
            let mut spec = build_spec(ExperimentKind::StrategyTable, global, Some((range, &series)))?;
            let mut strategy: Strategy = strategy.parse().map_err(|e: String| anyhow!(e))?;
            if let (Strategy::Mpc { .. }, Some(h)) = (strategy, horizon) {
                strategy = Strategy::Mpc { horizon_days: *h };
            }
            spec.base.strategy = strategy;
            if let (Some(c), Some(h)) = (window_center, window_hours) {
                let center = ClockTime::parse(c).map_err(|e| anyhow!(e))?;
                spec.base.behavior = BehaviorSpec::Fixed(FixedSchedule {
                    center,
                    length_hours: *h,
                    demand_kwh: *demand,
                });
            }
            let result = sim::run(&spec.base, &series)?;
            let summary = SimulateOutput {
                meta: ReportMeta {
                    config: serde_json::to_value(&spec.base)?,
                    seeds: vec![spec.base.seed],
                    data_hash: series.data_hash(),
                    tool_version: env!("CARGO_PKG_VERSION").to_string(),
                },
                strategy: result.strategy,
                seed: result.seed,
                energy_kwh: result.totals.energy_kwh,
                emissions_g: result.totals.emissions_g,
                c_ev: result.totals.c_ev,
                consumed_kwh: result.consumed_kwh,
                final_soc: result.final_soc,
                sessions: &result.totals.sessions,
                events: &result.events,
            };
            let mut text = serde_json::to_string_pretty(&summary)?;
            text.push('\n');
            write_output(out.as_deref(), &text)?;
            if let Some(p) = log_csv {
                write_output(Some(p), &result.log_csv())?;
            }
        }
        Command::Table1 {
            data,
            range,
            horizons,
            out,
        } => {
            let series = load_series(data, global, 0, &series_label(data))?;
            let mut spec = build_spec(ExperimentKind::StrategyTable, global, Some((range, &series)))?;
            if let Some(h) = horizons {
                spec.horizons = h.clone();
            }
            apply_report_opts(&mut spec, out);
            let report = experiments::strategy_table(&spec, &series)?;
            emit_report(&spec, &report)?;
        }
        Command::Sweep {
            data,
            range,
            lengths,
            demands,
            horizon,
            overnight_center,
            daytime_center,
            out,
            out_matrix,
        } => {
            let series = load_series(data, global, 0, &series_label(data))?;
            let mut spec = build_spec(ExperimentKind::FlexibilitySweep, global, Some((range, &series)))?;
            if let Some(l) = lengths {
                spec.sweep.lengths_hours = l.clone();
            }
            if let Some(d) = demands {
                spec.sweep.demands_kwh = d.clone();
            }
            if let Some(h) = horizon {
                spec.sweep.horizon_days = *h;
            }
            for (name, center) in [("overnight", overnight_center), ("daytime", daytime_center)] {
                if let Some(c) = center {
                    let center = ClockTime::parse(c).map_err(|e| anyhow!(e))?;
                    match spec.sweep.placements.iter_mut().find(|p| p.name == name) {
                        Some(p) => p.center = center,
                        None => spec.sweep.placements.push(Placement {
                            name: name.into(),
                            center,
                        }),
                    }
                }
            }
            apply_report_opts(&mut spec, out);
            if out_matrix.is_some() {
                spec.outputs.matrix_csv = out_matrix.clone();
            }
            let report = experiments::flexibility_sweep(&spec, &series)?;
            emit_report(&spec, &report)?;
            if let Some(p) = &spec.outputs.matrix_csv {
                write_output(Some(p), &sweep_matrix_csv(&report, &spec.sweep))?;
            }
        }
        Command::Regional {
            regions,
            data_dir,
            fetch,
            base_url,
            registry,
            range,
            horizons,
            out,
        } => {
            let registry = match registry {
                Some(p) => RegionRegistry::from_file(p)?,
                None => RegionRegistry::default(),
            };
            let mut spec = build_spec(ExperimentKind::Regional, global, None)?;
            if let Some(r) = regions {
                spec.regions = r.clone();
            }
            if let Some(h) = horizons {
                spec.horizons = h.clone();
            }
            apply_report_opts(&mut spec, out);
            let from = range.from.as_deref().map(parse_instant).transpose()?;
            let to = range.to.as_deref().map(parse_instant).transpose()?;
            let client = api_client(global, base_url).with_registry(registry.clone());
            let inputs: Vec<RegionInput> = spec
                .regions
                .iter()
                .map(|&id| {
                    let name = registry
                        .get(id)
                        .map_or_else(|| format!("region {id}"), |r| r.name.clone());
                    let local = data_dir
                        .as_ref()
                        .map(|d| d.join(format!("{id}.csv")))
                        .filter(|p| p.exists());
                    let loaded = match (local, fetch) {
                        (Some(p), _) => load_series(&p, global, id, &name).map_err(|e| format!("{e:#}")),
                        (None, true) => match (from, to) {
                            (Some(f), Some(t)) => client
                                .fetch_region(RegionSelector::Regional(id), f, t)
                                .map_err(|e| e.to_string()),
                            _ => Err("--from and --to are required to fetch".to_string()),
                        },
                        (None, false) => Err("no data file and --fetch not given".to_string()),
                    };
                    (id, name, loaded)
                })
                .collect();
            let coverage = inputs.iter().find_map(|(_, _, s)| s.as_ref().ok()).map(default_range);
            match (from.or(coverage.map(|c| c.0)), to.or(coverage.map(|c| c.1))) {
                (Some(f), Some(t)) => {
                    spec.base.from = f;
                    spec.base.to = t;
                }
                _ => bail!("no region data available; pass --from/--to with --fetch or provide --data-dir"),
            }
            let report = experiments::regional(&spec, &inputs)?;
            emit_report(&spec, &report)?;
        }
        Command::Synth { start, days, out } => {
            let signal = SyntheticSignal {
                start: parse_instant(start)?,
                days: *days,
                ..SyntheticSignal::default()
            };
            write_output(Some(out), &signal.series()?.to_csv())?;
        }
    }
    Ok(())
}
