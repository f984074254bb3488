//! C ABI over the simulator.
//!
//! Every entry point returns a [`RidesimStatus`]; on failure a message is
//! available from [`ridesim_last_error`] on the same thread. Objects are
//! opaque handles created by `*_load`/`*_run_*` functions and released with
//! the matching `*_free`. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ridesim::assignment::{solve_assignment, CostMatrix};
use ridesim::decisions::DecisionRegistry;
use ridesim::engine::log::events_to_csv;
use ridesim::engine::{DayResult, DayState};
use ridesim::experiments::simulate_day;
use ridesim::kpi::{KpiReport, SystemKpi};
use ridesim::scenario::{Scenario, ScenarioConfig};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RidesimStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The scenario or its input files are invalid.
    ConfigError = 3,
    /// The simulation failed while running.
    RuntimeError = 4,
    /// Reading or writing files failed.
    IoError = 5,
    /// A node id or index was out of range.
    OutOfRange = 6,
    /// An internal bug; the message holds the panic text.
    Panic = 7,
}

/// A loaded scenario: configuration, road network and skim matrix.
pub struct RidesimScenario {
    scenario: Scenario,
}

/// One simulated day with its event log and KPIs.
pub struct RidesimDay {
    result: DayResult,
    report: KpiReport,
}

/// System-level KPIs of one day. Undefined means are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RidesimSystemKpi {
    pub day: u32,
    pub n_travellers: u64,
    pub n_served: u64,
    pub n_unserved: u64,
    pub n_opted_out: u64,
    pub n_rejected: u64,
    pub fleet_participating: u64,
    pub mean_wait_s: f64,
    pub median_wait_s: f64,
    pub p90_wait_s: f64,
    pub mean_driver_idle_s: f64,
    pub empty_vkm: f64,
    pub occupied_vkm: f64,
}

impl From<&SystemKpi> for RidesimSystemKpi {
    fn from(s: &SystemKpi) -> Self {
        let nan = |v: Option<f64>| v.unwrap_or(f64::NAN);
        Self {
            day: s.day,
            n_travellers: s.n_travellers as u64,
            n_served: s.n_served as u64,
            n_unserved: s.n_unserved as u64,
            n_opted_out: s.n_opted_out as u64,
            n_rejected: s.n_rejected as u64,
            fleet_participating: s.fleet_participating as u64,
            mean_wait_s: nan(s.mean_wait_s),
            median_wait_s: nan(s.median_wait_s),
            p90_wait_s: nan(s.p90_wait_s),
            mean_driver_idle_s: nan(s.mean_driver_idle_s),
            empty_vkm: s.empty_vkm,
            occupied_vkm: s.occupied_vkm,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let mut bytes = message.into().into_bytes();
    bytes.retain(|&b| b != 0);
    let message = CString::new(bytes).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(message));
}

struct Failure(RidesimStatus, String);

impl Failure {
    fn new(status: RidesimStatus, message: impl std::fmt::Display) -> Self {
        Self(status, message.to_string())
    }
}

/// Runs `body`, converting errors and panics into a status plus message.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> RidesimStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => RidesimStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(panic) => {
            let text = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {text}"));
            RidesimStatus::Panic
        }
    }
}

fn not_null<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure::new(RidesimStatus::NullArgument, format!("`{name}` is null")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be null or a valid NUL-terminated string.
unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    not_null(p, name)?;
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(RidesimStatus::InvalidUtf8, format!("`{name}` is not valid UTF-8")))
}

fn into_c_string(text: String) -> *mut c_char {
    let mut bytes = text.into_bytes();
    bytes.retain(|&b| b != 0);
    CString::new(bytes).expect("nul bytes removed").into_raw()
}

/// Message of the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ridesim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |m| m.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ridesim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a scenario JSON file; relative paths inside it resolve against the
/// file's directory.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ridesim_scenario_load(path: *const c_char, out: *mut *mut RidesimScenario) -> RidesimStatus {
    guard(|| {
        not_null(out, "out")?;
        let path = str_arg(path, "path")?;
        let scenario = Scenario::load(Path::new(path)).map_err(|e| Failure::new(RidesimStatus::ConfigError, e))?;
        *out = Box::into_raw(Box::new(RidesimScenario { scenario }));
        Ok(())
    })
}

/// Parses a scenario from a JSON document; relative paths resolve against
/// `base_dir` (may be null for the working directory).
///
/// # Safety
/// `json` must be a valid NUL-terminated string, `base_dir` null or one, and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ridesim_scenario_from_json(
    json: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut RidesimScenario,
) -> RidesimStatus {
    guard(|| {
        not_null(out, "out")?;
        let json = str_arg(json, "json")?;
        let base = if base_dir.is_null() {
            "."
        } else {
            str_arg(base_dir, "base_dir")?
        };
        let config = ScenarioConfig::from_json_str(json, Path::new(base))
            .map_err(|e| Failure::new(RidesimStatus::ConfigError, e))?;
        let scenario = Scenario::build(config).map_err(|e| Failure::new(RidesimStatus::ConfigError, e))?;
        *out = Box::into_raw(Box::new(RidesimScenario { scenario }));
        Ok(())
    })
}

/// Releases a scenario. Null is ignored.
///
/// # Safety
/// `scenario` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ridesim_scenario_free(scenario: *mut RidesimScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Number of nodes in the scenario's road network.
///
/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ridesim_scenario_n_nodes(scenario: *const RidesimScenario, out: *mut u32) -> RidesimStatus {
    guard(|| {
        not_null(scenario, "scenario")?;
        not_null(out, "out")?;
        *out = (*scenario).scenario.net.n_nodes() as u32;
        Ok(())
    })
}

/// Shortest-path travel time (s) and distance (m) between two nodes.
///
/// # Safety
/// `scenario` must be a live handle; `time_s` and `distance_m` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ridesim_scenario_skim(
    scenario: *const RidesimScenario,
    from: u32,
    to: u32,
    time_s: *mut f64,
    distance_m: *mut f64,
) -> RidesimStatus {
    guard(|| {
        not_null(scenario, "scenario")?;
        not_null(time_s, "time_s")?;
        not_null(distance_m, "distance_m")?;
        let skim = &(*scenario).scenario.skim;
        let n = skim.n_nodes() as u32;
        if from >= n || to >= n {
            return Err(Failure::new(
                RidesimStatus::OutOfRange,
                format!("node pair ({from}, {to}) outside [0, {n})"),
            ));
        }
        *time_s = skim.travel_time(from, to);
        *distance_m = skim.distance(from, to);
        Ok(())
    })
}

/// Simulates day 0 of the scenario under `seed` with the built-in decision
/// modules named in the scenario.
///
/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ridesim_run_day(
    scenario: *const RidesimScenario,
    seed: u64,
    out: *mut *mut RidesimDay,
) -> RidesimStatus {
    guard(|| {
        not_null(scenario, "scenario")?;
        not_null(out, "out")?;
        let scenario = &(*scenario).scenario;
        let config_error = |e: ridesim::decisions::DecisionError| Failure::new(RidesimStatus::ConfigError, e);
        let decisions = DecisionRegistry::default()
            .resolve(&scenario.config.decisions)
            .map_err(config_error)?;
        decisions
            .check_params(&scenario.config.behaviour)
            .map_err(config_error)?;
        let result = simulate_day(scenario, &decisions, seed, 0, &DayState::default())
            .map_err(|e| Failure::new(RidesimStatus::RuntimeError, e))?;
        let report = KpiReport::from_log(&result.log, &[0], &scenario.config.platforms, scenario.net.n_nodes())
            .map_err(|e| Failure::new(RidesimStatus::RuntimeError, e))?;
        *out = Box::into_raw(Box::new(RidesimDay { result, report }));
        Ok(())
    })
}

/// Releases a simulated day. Null is ignored.
///
/// # Safety
/// `day` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ridesim_day_free(day: *mut RidesimDay) {
    if !day.is_null() {
        drop(Box::from_raw(day));
    }
}

/// Number of records in the day's event log.
///
/// # Safety
/// `day` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ridesim_day_event_count(day: *const RidesimDay, out: *mut u64) -> RidesimStatus {
    guard(|| {
        not_null(day, "day")?;
        not_null(out, "out")?;
        *out = (*day).result.log.len() as u64;
        Ok(())
    })
}

/// System KPIs of the day.
///
/// # Safety
/// `day` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ridesim_day_system_kpi(day: *const RidesimDay, out: *mut RidesimSystemKpi) -> RidesimStatus {
    guard(|| {
        not_null(day, "day")?;
        not_null(out, "out")?;
        let system = (*day)
            .report
            .system
            .first()
            .ok_or_else(|| Failure::new(RidesimStatus::RuntimeError, "no system KPIs"))?;
        *out = RidesimSystemKpi::from(system);
        Ok(())
    })
}

/// The event log as CSV. Release the string with [`ridesim_string_free`].
///
/// # Safety
/// `day` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ridesim_day_events_csv(day: *const RidesimDay, out: *mut *mut c_char) -> RidesimStatus {
    guard(|| {
        not_null(day, "day")?;
        not_null(out, "out")?;
        *out = into_c_string(events_to_csv(&(*day).result.log));
        Ok(())
    })
}

/// Writes `events.csv` and the four KPI CSVs into `dir`, creating it if needed.
///
/// # Safety
/// `day` must be a live handle and `dir` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ridesim_day_write(day: *const RidesimDay, dir: *const c_char) -> RidesimStatus {
    guard(|| {
        not_null(day, "day")?;
        let dir = Path::new(str_arg(dir, "dir")?);
        let io = |e: &dyn std::fmt::Display| Failure::new(RidesimStatus::IoError, e);
        std::fs::create_dir_all(dir).map_err(|e| io(&e))?;
        std::fs::write(dir.join("events.csv"), events_to_csv(&(*day).result.log)).map_err(|e| io(&e))?;
        (*day).report.write(dir).map_err(|e| io(&e))?;
        Ok(())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ridesim_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Minimum-cost assignment on a row-major `rows × cols` cost matrix; NaN
/// marks a forbidden pair. Writes the matched column of each row to
/// `row_to_col` (`-1` when unmatched) and the number of pairs to `n_pairs`.
/// Ties resolve to the lexicographically smallest (row, column) pair list.
///
/// # Safety
/// `cost` must point to `rows * cols` doubles, `row_to_col` to `rows`
/// writable `int64_t`, and `n_pairs` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ridesim_assign(
    cost: *const f64,
    rows: usize,
    cols: usize,
    row_to_col: *mut i64,
    n_pairs: *mut usize,
) -> RidesimStatus {
    guard(|| {
        not_null(n_pairs, "n_pairs")?;
        if rows > 0 {
            not_null(row_to_col, "row_to_col")?;
        }
        if rows > 0 && cols > 0 {
            not_null(cost, "cost")?;
        }
        let size = rows
            .checked_mul(cols)
            .ok_or_else(|| Failure::new(RidesimStatus::OutOfRange, "matrix size overflows"))?;
        let flat = if size == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(cost, size)
        };
        if let Some(bad) = flat.iter().find(|c| c.is_infinite()) {
            return Err(Failure::new(
                RidesimStatus::OutOfRange,
                format!("cost {bad} is not finite"),
            ));
        }
        let matrix: CostMatrix = (0..rows)
            .map(|r| {
                (0..cols)
                    .map(|c| Some(flat[r * cols + c]).filter(|v| !v.is_nan()))
                    .collect()
            })
            .collect();
        let row_keys: Vec<u64> = (0..rows as u64).collect();
        let col_keys: Vec<u64> = (0..cols as u64).collect();
        let pairs = solve_assignment(&matrix, &row_keys, &col_keys);
        let out = if rows == 0 {
            &mut [][..]
        } else {
            std::slice::from_raw_parts_mut(row_to_col, rows)
        };
        out.fill(-1);
        for &(r, c) in &pairs {
            out[r] = c as i64;
        }
        *n_pairs = pairs.len();
        Ok(())
    })
}
