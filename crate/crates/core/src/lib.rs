//! Carbon-aware predictive scheduling of domestic EV charging.
//!
//! The crate plans charging power over several overnight sessions so that
//! the carbon intensity of the energy drawn is minimized while the battery
//! stays inside its operating band and reaches a minimum SOC every morning.
//!
//! - [`grid_data`]: half-hourly intensity series, CSV ingestion and the web API client.
//! - [`forecast`]: synthetic long-range forecasts with lead-dependent error.
//! - [`scheduler`]: the horizon optimization, its brute-force oracle and the plug-and-charge baseline.
//! - [`behavior`]: plug-in/out and daily-energy models with conservative planning values.
//! - [`sim`]: receding-horizon execution over a date range.
//! - [`experiments`]: strategy, flexibility and regional studies with CSV/JSON reports.

pub mod behavior;
pub mod experiments;
pub mod forecast;
pub mod grid_data;
mod rng;
pub mod scheduler;
pub mod sim;

pub use grid_data::CarbonSeries;
pub use scheduler::{solve, BatteryParams, HorizonProblem, PowerSchedule};
