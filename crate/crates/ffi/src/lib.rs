//! C interface to the planner.
//!
//! Scenarios and simulation runs cross the boundary as opaque handles that
//! the caller releases with the matching `*_free` function. Every fallible
//! call returns an [`LgStatus`]; on failure [`lg_last_error_message`] holds
//! a description until the next failing call on the same thread. Panics are
//! caught and reported as [`LgStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use lanegame_core::harness::{
    check_consecutive_lane_safety, check_longitudinal_safety, load_scenario, simulate, Replan,
    Scenario, SimError, SimOptions, Trace,
};
use lanegame_core::milp_core::BranchAndBound;
use lanegame_core::mld_model::RuleSet;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LgStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    /// Scenario missing, unparsable or invalid.
    Scenario = 3,
    /// The best-response iteration did not reach an equilibrium; the run
    /// handle still carries the trace up to the failing round.
    NoEquilibrium = 4,
    /// Solver or compiler failure.
    Solver = 5,
    OutOfRange = 6,
    Io = 7,
    Panic = 8,
}

/// Options for [`lg_simulate`]. `steps == 0` keeps the scenario's count.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LgSimOptions {
    pub free_space: bool,
    pub lateral: bool,
    pub per_window: bool,
    pub certify: bool,
    pub steps: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LgVehicleState {
    pub pos: f64,
    pub v: f64,
    pub z: i64,
    pub a_l: bool,
    pub a_r: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LgRoundInfo {
    pub iterations: usize,
    pub potential: f64,
    pub wall_ms: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LgSafety {
    pub longitudinal_safe: bool,
    pub lateral_safe: bool,
    /// Smallest same-lane gap minus safety distance; infinite if lanes were never shared.
    pub min_margin: f64,
}

/// Opaque scenario handle.
pub struct LgScenario(Scenario);

/// Opaque simulation result.
pub struct LgRun {
    trace: Trace,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("NUL bytes removed"));
}

fn fail(status: LgStatus, msg: impl Into<String>) -> LgStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> LgStatus) -> LgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(LgStatus::Panic, format!("panic: {msg}"))
        }
    }
}

/// # Safety
/// `s` must be null or a NUL-terminated string.
unsafe fn path_arg(s: *const c_char) -> Result<PathBuf, LgStatus> {
    if s.is_null() {
        return Err(fail(LgStatus::NullArgument, "path is null"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| fail(LgStatus::InvalidUtf8, "path is not valid UTF-8"))
}

/// Message of the last failure on this thread; empty if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Defaults: every rule on, replanning each step, certification on.
#[no_mangle]
pub extern "C" fn lg_sim_options_default() -> LgSimOptions {
    LgSimOptions {
        free_space: true,
        lateral: true,
        per_window: false,
        certify: true,
        steps: 0,
    }
}

/// Loads and validates a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lg_scenario_load(
    path: *const c_char,
    out: *mut *mut LgScenario,
) -> LgStatus {
    guard(|| {
        if out.is_null() {
            return fail(LgStatus::NullArgument, "out is null");
        }
        *out = ptr::null_mut();
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match load_scenario(&path) {
            Ok(sc) => {
                *out = Box::into_raw(Box::new(LgScenario(sc)));
                LgStatus::Ok
            }
            Err(e) => fail(LgStatus::Scenario, e.to_string()),
        }
    })
}

/// # Safety
/// `scenario` must be null or a handle from [`lg_scenario_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lg_scenario_free(scenario: *mut LgScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Number of vehicles; 0 for a null handle.
///
/// # Safety
/// `scenario` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lg_scenario_vehicle_count(scenario: *const LgScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.0.initial.len())
}

/// Runs the receding-horizon simulation. `options` may be null for the
/// defaults. On [`LgStatus::NoEquilibrium`] `*out` still receives the partial run.
///
/// # Safety
/// `scenario` must be a live handle, `options` null or valid, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn lg_simulate(
    scenario: *const LgScenario,
    options: *const LgSimOptions,
    out: *mut *mut LgRun,
) -> LgStatus {
    guard(|| {
        if out.is_null() {
            return fail(LgStatus::NullArgument, "out is null");
        }
        *out = ptr::null_mut();
        let Some(sc) = scenario.as_ref() else {
            return fail(LgStatus::NullArgument, "scenario is null");
        };
        let opts = options
            .as_ref()
            .copied()
            .unwrap_or_else(|| lg_sim_options_default());
        let sim = SimOptions {
            replan: if opts.per_window {
                Replan::PerWindow
            } else {
                Replan::EveryStep
            },
            rules: Some(RuleSet {
                free_space: opts.free_space,
                lateral: opts.lateral,
            }),
            certify: opts.certify,
            steps: (opts.steps > 0).then_some(opts.steps as usize),
            ..SimOptions::default()
        };
        match simulate(&sc.0, &sim, &BranchAndBound::default()) {
            Ok(outcome) => {
                *out = Box::into_raw(Box::new(LgRun {
                    trace: outcome.trace,
                }));
                LgStatus::Ok
            }
            Err(err) => {
                let msg = err.to_string();
                let non_convergence = err.is_non_convergence();
                let partial = match err {
                    SimError::Game { partial, .. } | SimError::NotEquilibrium { partial, .. } => {
                        *partial
                    }
                };
                if non_convergence {
                    *out = Box::into_raw(Box::new(LgRun { trace: partial }));
                    fail(LgStatus::NoEquilibrium, msg)
                } else {
                    fail(LgStatus::Solver, msg)
                }
            }
        }
    })
}

/// # Safety
/// `run` must be null or a handle from [`lg_simulate`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lg_run_free(run: *mut LgRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of recorded steps including the initial state; 0 for null.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lg_run_step_count(run: *const LgRun) -> usize {
    run.as_ref().map_or(0, |r| r.trace.states.len())
}

/// Number of planning rounds; 0 for null.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lg_run_round_count(run: *const LgRun) -> usize {
    run.as_ref().map_or(0, |r| r.trace.rounds.len())
}

/// State of vehicle `vehicle` (scenario order) at `step`.
///
/// # Safety
/// `run` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn lg_run_state(
    run: *const LgRun,
    step: usize,
    vehicle: usize,
    out: *mut LgVehicleState,
) -> LgStatus {
    guard(|| {
        let (Some(run), false) = (run.as_ref(), out.is_null()) else {
            return fail(LgStatus::NullArgument, "run or out is null");
        };
        let Some(s) = run
            .trace
            .states
            .get(step)
            .and_then(|snap| snap.get(vehicle))
        else {
            return fail(
                LgStatus::OutOfRange,
                format!("no state for step {step}, vehicle {vehicle}"),
            );
        };
        *out = LgVehicleState {
            pos: s.pos,
            v: s.v,
            z: s.z,
            a_l: s.a_l,
            a_r: s.a_r,
        };
        LgStatus::Ok
    })
}

/// Metadata of planning round `round`.
///
/// # Safety
/// `run` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn lg_run_round(
    run: *const LgRun,
    round: usize,
    out: *mut LgRoundInfo,
) -> LgStatus {
    guard(|| {
        let (Some(run), false) = (run.as_ref(), out.is_null()) else {
            return fail(LgStatus::NullArgument, "run or out is null");
        };
        let Some(m) = run.trace.rounds.get(round) else {
            return fail(LgStatus::OutOfRange, format!("no round {round}"));
        };
        *out = LgRoundInfo {
            iterations: m.iterations,
            potential: m.potential,
            wall_ms: m.wall_ms,
        };
        LgStatus::Ok
    })
}

/// Runs both safety monitors on the run against its scenario.
///
/// # Safety
/// `run` and `scenario` must be live handles and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn lg_run_safety(
    run: *const LgRun,
    scenario: *const LgScenario,
    out: *mut LgSafety,
) -> LgStatus {
    guard(|| {
        let (Some(run), Some(sc), false) = (run.as_ref(), scenario.as_ref(), out.is_null()) else {
            return fail(LgStatus::NullArgument, "run, scenario or out is null");
        };
        if run.trace.vehicles != sc.0.vehicle_ids() {
            return fail(
                LgStatus::OutOfRange,
                "run and scenario have different vehicles",
            );
        }
        let lon = check_longitudinal_safety(&run.trace, &sc.0.params);
        let lat = check_consecutive_lane_safety(&run.trace, sc.0.world.d_hat);
        *out = LgSafety {
            longitudinal_safe: lon.is_safe(),
            lateral_safe: lat.is_safe(),
            min_margin: lon.min_margin,
        };
        LgStatus::Ok
    })
}

/// Writes the trace CSV to `path` and round metadata next to it with the
/// `.game` extension.
///
/// # Safety
/// `run` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn lg_run_write_trace(run: *const LgRun, path: *const c_char) -> LgStatus {
    guard(|| {
        let Some(run) = run.as_ref() else {
            return fail(LgStatus::NullArgument, "run is null");
        };
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match run.trace.write(&path) {
            Ok(_) => LgStatus::Ok,
            Err(e) => fail(LgStatus::Io, e.to_string()),
        }
    })
}
