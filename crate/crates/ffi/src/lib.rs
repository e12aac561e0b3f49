//! C ABI over the scheduler and simulator.
//!
//! Objects cross the boundary as opaque handles created by `cs_*_new` /
//! `cs_*_from_*` and released by the matching `cs_*_free`. Every fallible
//! call returns a [`CsStatus`]; on failure the message is available from
//! [`cs_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use carbon_sched::grid_data::{parse_carbon_csv, CarbonSeries, IngestOptions};
use carbon_sched::scheduler::{solve, BatteryParams, HorizonProblem, PowerSchedule, SessionWindow, SolveError};
use carbon_sched::sim::{self, ScenarioConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Parse = 3,
    Infeasible = 4,
    Simulation = 5,
    IndexOutOfRange = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CsBattery {
    pub capacity_kwh: f64,
    pub max_power_kw: f64,
    pub soc_min: f64,
    pub soc_max: f64,
}

impl From<CsBattery> for BatteryParams {
    fn from(b: CsBattery) -> Self {
        BatteryParams {
            capacity_kwh: b.capacity_kwh,
            max_power_kw: b.max_power_kw,
            soc_min: b.soc_min,
            soc_max: b.soc_max,
        }
    }
}

/// Validated carbon-intensity series.
pub struct CsSeries(CarbonSeries);

/// Horizon problem under construction.
pub struct CsProblem {
    battery: BatteryParams,
    soc0: f64,
    delta_t_hours: f64,
    sessions: Vec<SessionWindow>,
    floors: Vec<f64>,
    demands: Vec<f64>,
}

/// Solved power schedule.
pub struct CsSchedule(PowerSchedule);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn guarded(f: impl FnOnce() -> CsStatus) -> CsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            CsStatus::Panic
        }
    }
}

fn fail(status: CsStatus, msg: impl Into<String>) -> CsStatus {
    set_error(msg);
    status
}

/// Message of the last failure on this thread (empty if none). The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn cs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn cs_battery_default() -> CsBattery {
    let b = BatteryParams::default();
    CsBattery {
        capacity_kwh: b.capacity_kwh,
        max_power_kw: b.max_power_kw,
        soc_min: b.soc_min,
        soc_max: b.soc_max,
    }
}

/// Parses canonical CSV (`timestamp,actual_gco2_per_kwh[,forecast_gco2_per_kwh]`) of `len` bytes.
///
/// # Safety
/// `csv` must point to `len` readable bytes and `out` to writable storage
/// for one pointer.
#[no_mangle]
pub unsafe extern "C" fn cs_series_from_csv(csv: *const u8, len: usize, out: *mut *mut CsSeries) -> CsStatus {
    guarded(|| {
        if csv.is_null() || out.is_null() {
            return fail(CsStatus::NullArgument, "csv and out must be non-null");
        }
        let bytes = std::slice::from_raw_parts(csv, len);
        match parse_carbon_csv(bytes, &IngestOptions::default()) {
            Ok(series) => {
                *out = Box::into_raw(Box::new(CsSeries(series)));
                CsStatus::Ok
            }
            Err(e) => fail(CsStatus::Parse, e.to_string()),
        }
    })
}

/// Number of intervals, or 0 for a null handle.
///
/// # Safety
/// `series` must be null or a live handle from [`cs_series_from_csv`].
#[no_mangle]
pub unsafe extern "C" fn cs_series_len(series: *const CsSeries) -> usize {
    series.as_ref().map_or(0, |s| s.0.len())
}

/// # Safety
/// `series` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cs_series_free(series: *mut CsSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

/// Starts an empty problem.
///
/// # Safety
/// `out` must point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn cs_problem_new(
    battery: CsBattery,
    soc0: f64,
    delta_t_hours: f64,
    out: *mut *mut CsProblem,
) -> CsStatus {
    guarded(|| {
        if out.is_null() {
            return fail(CsStatus::NullArgument, "out must be non-null");
        }
        let battery = BatteryParams::from(battery);
        if let Err(e) = battery.validate() {
            return fail(CsStatus::InvalidArgument, e.to_string());
        }
        if !(delta_t_hours > 0.0) {
            return fail(CsStatus::InvalidArgument, "delta_t_hours must be > 0");
        }
        *out = Box::into_raw(Box::new(CsProblem {
            battery,
            soc0,
            delta_t_hours,
            sessions: Vec::new(),
            floors: Vec::new(),
            demands: Vec::new(),
        }));
        CsStatus::Ok
    })
}

/// Appends a session of `n` intervals starting at horizon interval
/// `first_interval`. `demand_after_kwh` is the driving energy before the
/// next session; it is ignored for the last one.
///
/// # Safety
/// `problem` must be a live handle and `intensities` must point to `n`
/// readable doubles.
#[no_mangle]
pub unsafe extern "C" fn cs_problem_add_session(
    problem: *mut CsProblem,
    first_interval: usize,
    intensities: *const f64,
    n: usize,
    morning_floor: f64,
    demand_after_kwh: f64,
) -> CsStatus {
    guarded(|| {
        let Some(p) = problem.as_mut() else {
            return fail(CsStatus::NullArgument, "problem must be non-null");
        };
        if intensities.is_null() || n == 0 {
            return fail(CsStatus::InvalidArgument, "a session needs at least one interval");
        }
        let values = std::slice::from_raw_parts(intensities, n).to_vec();
        p.sessions.push(SessionWindow::new(first_interval, values));
        p.floors.push(morning_floor);
        p.demands.push(demand_after_kwh);
        CsStatus::Ok
    })
}

/// # Safety
/// `problem` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cs_problem_free(problem: *mut CsProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

impl CsProblem {
    fn build(&self) -> HorizonProblem {
        let n = self.sessions.len();
        HorizonProblem {
            sessions: self.sessions.clone(),
            demands_kwh: self.demands[..n.saturating_sub(1)].to_vec(),
            soc0: self.soc0,
            morning_floors: self.floors.clone(),
            battery: self.battery,
            delta_t_hours: self.delta_t_hours,
        }
    }
}

/// Solves for the minimum-carbon schedule. Infeasible problems return
/// [`CsStatus::Infeasible`] with the first failing session in the message.
///
/// # Safety
/// `problem` must be a live handle; `out` must point to writable storage
/// for one pointer.
#[no_mangle]
pub unsafe extern "C" fn cs_solve(problem: *const CsProblem, out: *mut *mut CsSchedule) -> CsStatus {
    guarded(|| {
        let (Some(p), false) = (problem.as_ref(), out.is_null()) else {
            return fail(CsStatus::NullArgument, "problem and out must be non-null");
        };
        match solve(&p.build()) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(CsSchedule(s)));
                CsStatus::Ok
            }
            Err(e @ SolveError::Infeasible(_)) => fail(CsStatus::Infeasible, e.to_string()),
            Err(e) => fail(CsStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Predicted gCO2 of the schedule, NaN for a null handle.
///
/// # Safety
/// `schedule` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cs_schedule_cost(schedule: *const CsSchedule) -> f64 {
    schedule.as_ref().map_or(f64::NAN, |s| s.0.predicted_cost)
}

/// # Safety
/// `schedule` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cs_schedule_session_count(schedule: *const CsSchedule) -> usize {
    schedule.as_ref().map_or(0, |s| s.0.powers.len())
}

/// Copies the powers (kW) of `session` into `out`. `*written` receives the
/// session length; when `capacity` is too small nothing is copied and
/// [`CsStatus::InvalidArgument`] is returned.
///
/// # Safety
/// `schedule` must be a live handle, `out` must point to `capacity`
/// writable doubles and `written` to one writable `size_t`.
#[no_mangle]
pub unsafe extern "C" fn cs_schedule_powers(
    schedule: *const CsSchedule,
    session: usize,
    out: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> CsStatus {
    guarded(|| {
        let Some(s) = schedule.as_ref() else {
            return fail(CsStatus::NullArgument, "schedule must be non-null");
        };
        if written.is_null() {
            return fail(CsStatus::NullArgument, "written must be non-null");
        }
        let Some(powers) = s.0.powers.get(session) else {
            return fail(CsStatus::IndexOutOfRange, format!("session {session} out of range"));
        };
        *written = powers.len();
        if out.is_null() || capacity < powers.len() {
            return fail(
                CsStatus::InvalidArgument,
                format!("buffer needs {} doubles", powers.len()),
            );
        }
        ptr::copy_nonoverlapping(powers.as_ptr(), out, powers.len());
        CsStatus::Ok
    })
}

/// # Safety
/// `schedule` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cs_schedule_free(schedule: *mut CsSchedule) {
    if !schedule.is_null() {
        drop(Box::from_raw(schedule));
    }
}

/// Runs one scenario described by `config_json` (a scenario config object)
/// and writes a JSON summary with totals, per-session breakdown and events
/// to `*out_json`. Release it with [`cs_string_free`].
///
/// # Safety
/// `series` must be a live handle, `config_json` a NUL-terminated string,
/// `out_json` writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn cs_simulate_json(
    series: *const CsSeries,
    config_json: *const c_char,
    out_json: *mut *mut c_char,
) -> CsStatus {
    guarded(|| {
        let Some(series) = series.as_ref() else {
            return fail(CsStatus::NullArgument, "series must be non-null");
        };
        if config_json.is_null() || out_json.is_null() {
            return fail(CsStatus::NullArgument, "config_json and out_json must be non-null");
        }
        let Ok(text) = CStr::from_ptr(config_json).to_str() else {
            return fail(CsStatus::Parse, "config is not UTF-8");
        };
        let config: ScenarioConfig = match serde_json::from_str(text) {
            Ok(c) => c,
            Err(e) => return fail(CsStatus::Parse, format!("config: {e}")),
        };
        let result = match sim::run(&config, &series.0) {
            Ok(r) => r,
            Err(e) => return fail(CsStatus::Simulation, e.to_string()),
        };
        let summary = serde_json::json!({
            "strategy": result.strategy,
            "seed": result.seed,
            "energy_kwh": result.totals.energy_kwh,
            "emissions_g": result.totals.emissions_g,
            "c_ev": result.totals.c_ev,
            "consumed_kwh": result.consumed_kwh,
            "final_soc": result.final_soc,
            "sessions": result.totals.sessions,
            "events": result.events,
        });
        match CString::new(summary.to_string()) {
            Ok(s) => {
                *out_json = s.into_raw();
                CsStatus::Ok
            }
            Err(e) => fail(CsStatus::Simulation, e.to_string()),
        }
    })
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
