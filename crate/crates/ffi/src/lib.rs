//! C ABI for the cinecam planner.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_load`
//! functions and released by the matching `*_free`. Fallible calls return a
//! [`CinecamStatus`]; the message of the most recent failure on the calling
//! thread is available from [`cinecam_last_error_message`]. Strings returned
//! by the library must be released with [`cinecam_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use cinecam_core::harness::{run_scenario, RunReport, World};
use cinecam_core::selector::{Selector, SelectorConfig, ViewCosts};
use cinecam_core::{Error, Scenario, Vec3};

/// Result codes. Values 1 to 4 match the command-line exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CinecamStatus {
    Ok = 0,
    Io = 1,
    Config = 2,
    Numeric = 3,
    SizeLimit = 4,
    NullPointer = 5,
    InvalidUtf8 = 6,
    Panic = 7,
}

/// Parsed and validated scenario.
pub struct CinecamScenario {
    inner: Scenario,
}

/// Lattice, voxel world and cost tables built from a scenario, ready to plan.
pub struct CinecamPlanner {
    world: World,
}

/// One trajectory sample: time in seconds, position in metres, yaw in radians.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CinecamSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
}

/// Result of a full simulation run.
pub struct CinecamReport {
    report: RunReport,
    trajectories: Vec<Vec<CinecamSample>>,
}

/// Stateful live-stream selector.
pub struct CinecamSelector {
    inner: Selector,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> CinecamStatus {
    match err.exit_code() {
        1 => CinecamStatus::Io,
        3 => CinecamStatus::Numeric,
        4 => CinecamStatus::SizeLimit,
        _ => CinecamStatus::Config,
    }
}

enum Failure {
    Core(Error),
    Null(&'static str),
    Utf8(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CinecamStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CinecamStatus::Ok,
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("{what} is null"));
            CinecamStatus::NullPointer
        }
        Ok(Err(Failure::Utf8(what))) => {
            set_error(format!("{what} is not valid UTF-8"));
            CinecamStatus::InvalidUtf8
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            CinecamStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::Utf8(what))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    out.write(value);
    Ok(())
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message of the last failed call on this thread, or NULL if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cinecam_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cinecam_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cinecam_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a scenario document. `origin` names the document in diagnostics
/// and may be NULL.
///
/// # Safety
/// `json` and `origin` must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cinecam_scenario_from_json(
    json: *const c_char,
    origin: *const c_char,
    out: *mut *mut CinecamScenario,
) -> CinecamStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let origin = if origin.is_null() { "<scenario>" } else { str_arg(origin, "origin")? };
        let inner = Scenario::from_json(text, origin)?;
        put(out, Box::into_raw(Box::new(CinecamScenario { inner })), "out")
    })
}

/// Loads a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cinecam_scenario_load(path: *const c_char, out: *mut *mut CinecamScenario) -> CinecamStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let inner = Scenario::load(Path::new(path))?;
        put(out, Box::into_raw(Box::new(CinecamScenario { inner })), "out")
    })
}

/// Serializes the scenario with every default filled in.
///
/// # Safety
/// `scenario` must be a live handle; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cinecam_scenario_to_json(
    scenario: *const CinecamScenario,
    out_json: *mut *mut c_char,
) -> CinecamStatus {
    guard(|| {
        let s = ref_arg(scenario, "scenario")?;
        put(out_json, into_c_string(s.inner.to_json()), "out_json")
    })
}

/// Number of cameras in the scenario, 0 for NULL.
///
/// # Safety
/// `scenario` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cinecam_scenario_num_uavs(scenario: *const CinecamScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.inner.uavs.len())
}

/// # Safety
/// `scenario` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cinecam_scenario_free(scenario: *mut CinecamScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Builds the planning world for a scenario. The scenario handle may be
/// freed afterwards.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cinecam_planner_new(
    scenario: *const CinecamScenario,
    out: *mut *mut CinecamPlanner,
) -> CinecamStatus {
    guard(|| {
        let s = ref_arg(scenario, "scenario")?;
        let world = World::build(&s.inner)?;
        put(out, Box::into_raw(Box::new(CinecamPlanner { world })), "out")
    })
}

/// Number of lattice states, 0 for NULL.
///
/// # Safety
/// `planner` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cinecam_planner_num_states(planner: *const CinecamPlanner) -> usize {
    planner.as_ref().map_or(0, |p| p.world.lattice.len())
}

/// Plans greedily for `n` cameras at `positions` (`3 * n` doubles, x y z per
/// camera) at time `t0`, and returns the plan dump as JSON.
///
/// # Safety
/// `planner` must be a live handle, `positions` must point to `3 * n`
/// doubles, and `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cinecam_planner_plan(
    planner: *const CinecamPlanner,
    positions: *const f64,
    n: usize,
    t0: f64,
    out_json: *mut *mut c_char,
) -> CinecamStatus {
    guard(|| {
        let p = ref_arg(planner, "planner")?;
        if positions.is_null() {
            return Err(Failure::Null("positions"));
        }
        let flat = std::slice::from_raw_parts(positions, 3 * n);
        let cams: Vec<Vec3> = flat.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
        let (plan, _) = p.world.plan(&cams, t0)?;
        let json = serde_json::to_string(&plan.dump(&p.world.lattice, t0)).expect("plan serializes");
        put(out_json, into_c_string(json), "out_json")
    })
}

/// # Safety
/// `planner` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cinecam_planner_free(planner: *mut CinecamPlanner) {
    if !planner.is_null() {
        drop(Box::from_raw(planner));
    }
}

/// Runs the full receding-horizon simulation.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cinecam_run(scenario: *const CinecamScenario, out: *mut *mut CinecamReport) -> CinecamStatus {
    guard(|| {
        let s = ref_arg(scenario, "scenario")?;
        let report = run_scenario(&s.inner)?;
        let trajectories = report
            .trajectories
            .iter()
            .map(|t| {
                t.samples
                    .iter()
                    .map(|s| CinecamSample {
                        t: s.t,
                        x: s.position[0],
                        y: s.position[1],
                        z: s.position[2],
                        yaw: s.yaw,
                    })
                    .collect()
            })
            .collect();
        put(out, Box::into_raw(Box::new(CinecamReport { report, trajectories })), "out")
    })
}

/// Borrows camera `uav`'s trajectory. The samples stay valid until the report
/// is freed.
///
/// # Safety
/// `report` must be a live handle; `out_samples` and `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cinecam_report_trajectory(
    report: *const CinecamReport,
    uav: usize,
    out_samples: *mut *const CinecamSample,
    out_len: *mut usize,
) -> CinecamStatus {
    guard(|| {
        let r = ref_arg(report, "report")?;
        let traj = r.trajectories.get(uav).ok_or_else(|| {
            Failure::Core(Error::Config {
                context: "report",
                message: format!("camera {uav} out of range, report has {}", r.trajectories.len()),
            })
        })?;
        put(out_samples, traj.as_ptr(), "out_samples")?;
        put(out_len, traj.len(), "out_len")
    })
}

/// Minimum obstacle clearance and camera separation over the run, metres.
///
/// # Safety
/// `report` must be a live handle; both outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn cinecam_report_audit(
    report: *const CinecamReport,
    out_min_clearance: *mut f64,
    out_min_separation: *mut f64,
) -> CinecamStatus {
    guard(|| {
        let r = ref_arg(report, "report")?;
        put(out_min_clearance, r.report.audit.min_clearance, "out_min_clearance")?;
        put(out_min_separation, r.report.audit.min_separation, "out_min_separation")
    })
}

/// Full report as JSON.
///
/// # Safety
/// `report` must be a live handle; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cinecam_report_to_json(report: *const CinecamReport, out_json: *mut *mut c_char) -> CinecamStatus {
    guard(|| {
        let r = ref_arg(report, "report")?;
        let json = serde_json::to_string(&r.report).expect("report serializes");
        put(out_json, into_c_string(json), "out_json")
    })
}

/// # Safety
/// `report` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cinecam_report_free(report: *mut CinecamReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Creates a selector. `config_json` holds selector settings (any subset of
/// the scenario's `selector` section) or is NULL for the defaults.
///
/// # Safety
/// `config_json` must be NULL or a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cinecam_selector_new(
    num_cameras: usize,
    config_json: *const c_char,
    out: *mut *mut CinecamSelector,
) -> CinecamStatus {
    guard(|| {
        let cfg = if config_json.is_null() {
            SelectorConfig::default()
        } else {
            let text = str_arg(config_json, "config_json")?;
            serde_json::from_str(text).map_err(|e| Error::Parse {
                path: "selector config".into(),
                message: e.to_string(),
            })?
        };
        let inner = Selector::new(num_cameras, cfg)?;
        put(out, Box::into_raw(Box::new(CinecamSelector { inner })), "out")
    })
}

/// Advances the selector by `dt` seconds from time `t` given each camera's
/// visibility and prior costs (`n` entries each, `n` equal to the camera
/// count), and writes the camera on air.
///
/// # Safety
/// `selector` must be a live handle, `vis_costs` and `cine_costs` must point
/// to `n` doubles, and `out_camera` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cinecam_selector_step(
    selector: *mut CinecamSelector,
    t: f64,
    vis_costs: *const f64,
    cine_costs: *const f64,
    n: usize,
    dt: f64,
    out_camera: *mut usize,
) -> CinecamStatus {
    guard(|| {
        let sel = selector.as_mut().ok_or(Failure::Null("selector"))?;
        if vis_costs.is_null() || cine_costs.is_null() {
            return Err(Failure::Null("costs"));
        }
        let vis = std::slice::from_raw_parts(vis_costs, n);
        let cine = std::slice::from_raw_parts(cine_costs, n);
        if n != sel.inner.num_cameras() {
            return Err(Error::Config {
                context: "selector",
                message: format!("{n} costs given for {} cameras", sel.inner.num_cameras()),
            }
            .into());
        }
        let valid = |c: &f64| c.is_finite() && *c >= 0.0;
        if !(dt > 0.0 && vis.iter().all(valid) && cine.iter().all(valid)) {
            return Err(Error::Config {
                context: "selector",
                message: "dt must be positive and costs finite and non-negative".into(),
            }
            .into());
        }
        let costs: Vec<ViewCosts> = vis
            .iter()
            .zip(cine)
            .map(|(&v, &c)| ViewCosts { vis_cost: v, cine_cost: c })
            .collect();
        let cam = sel.inner.step(t, &costs, dt);
        put(out_camera, cam, "out_camera")
    })
}

/// Selection timeline so far as JSON records `{t_start, t_end, camera}`.
///
/// # Safety
/// `selector` must be a live handle; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cinecam_selector_timeline(
    selector: *const CinecamSelector,
    out_json: *mut *mut c_char,
) -> CinecamStatus {
    guard(|| {
        let sel = ref_arg(selector, "selector")?;
        let json = serde_json::to_string(&sel.inner.timeline()).expect("timeline serializes");
        put(out_json, into_c_string(json), "out_json")
    })
}

/// # Safety
/// `selector` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cinecam_selector_free(selector: *mut CinecamSelector) {
    if !selector.is_null() {
        drop(Box::from_raw(selector));
    }
}
