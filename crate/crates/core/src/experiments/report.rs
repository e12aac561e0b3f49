use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::SweepAxes;

/// One scenario/strategy cell. Energy and emissions are per-seed means;
/// `c_ev` is their ratio, so each row recomputes from its own fields.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scenario: String,
    pub region_id: Option<u16>,
    pub placement: Option<String>,
    pub window_hours: Option<f64>,
    pub demand_kwh: Option<f64>,
    pub strategy: String,
    pub replications: usize,
    pub energy_kwh: f64,
    pub emissions_g: f64,
    pub c_ev: Option<f64>,
    pub c_ev_min: Option<f64>,
    pub c_ev_max: Option<f64>,
    /// `c_ev` of the matched uncontrolled row.
    pub uncontrolled_c_ev: Option<f64>,
    pub pct_reduction_vs_uncontrolled: Option<f64>,
    /// gCO2e/kWh saved against the matched uncontrolled row.
    pub abs_reduction: Option<f64>,
    pub shortfall_count: usize,
    /// Set when the cell could not be computed.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub data_hash: String,
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub meta: ReportMeta,
    pub rows: Vec<ReportRow>,
}

fn strategy_rank(label: &str) -> (u8, usize) {
    match label.strip_prefix("mpc").and_then(|n| n.parse().ok()) {
        Some(n) => (1, n),
        None => (0, 0),
    }
}

pub(crate) fn combined_hash(parts: &[String]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

impl Report {
    /// Rows are sorted by scenario, then uncontrolled before MPC(N) by N.
    pub fn new(config: serde_json::Value, seeds: Vec<u64>, data_hash: String, mut rows: Vec<ReportRow>) -> Self {
        rows.sort_by(|a, b| {
            a.scenario
                .cmp(&b.scenario)
                .then_with(|| strategy_rank(&a.strategy).cmp(&strategy_rank(&b.strategy)))
        });
        Self {
            meta: ReportMeta {
                config,
                seeds,
                data_hash,
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
            },
            rows,
        }
    }

    pub fn row(&self, scenario: &str, strategy: &str) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.scenario == scenario && r.strategy == strategy)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is serializable");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row).expect("in-memory csv write");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
    }
}

/// Matrix view of a sweep: one line per (placement, demand), one column per
/// window length, cells are MPC `c_ev` (empty when absent).
pub fn sweep_matrix_csv(report: &Report, axes: &SweepAxes) -> String {
    let mpc = format!("mpc{}", axes.horizon_days);
    let mut out = String::from("placement,demand_kwh");
    for h in &axes.lengths_hours {
        out.push_str(&format!(",{h}h"));
    }
    out.push('\n');
    for p in &axes.placements {
        for &d in &axes.demands_kwh {
            out.push_str(&format!("{},{d}", p.name));
            for &h in &axes.lengths_hours {
                let cell = report.rows.iter().find(|r| {
                    r.strategy == mpc
                        && r.placement.as_deref() == Some(p.name.as_str())
                        && r.window_hours == Some(h)
                        && r.demand_kwh == Some(d)
                });
                out.push(',');
                if let Some(c) = cell.and_then(|r| r.c_ev) {
                    out.push_str(&format!("{c}"));
                }
            }
            out.push('\n');
        }
    }
    out
}
