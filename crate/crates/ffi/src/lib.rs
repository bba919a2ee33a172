//! C ABI for the lakes solver.
//!
//! Two opaque handles: a scenario (parsed and validated configuration
//! plus the lake it describes) and a simulation (grid, Biot-Savart basis
//! and the evolving state). All functions return either a status code or
//! a plain value; on failure the message is retrievable per thread with
//! [`lakes_last_error`]. Field data crosses the boundary as row-major
//! `f64` buffers sized `nx * ny`.
//!
//! The committed header `include/lakes.h` mirrors this surface; a test
//! checks that every exported symbol appears there.
//!
//! Handles are not thread safe: use each handle from one thread at a
//! time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use lakes::biot_savart::{build_basis, BiotSavartBasis, CirculationVector};
use lakes::config::{parse_config_str, ScenarioConfig};
use lakes::geometry::{DepthProfile, LakeGeometry, Point};
use lakes::grid::{build_grid, Grid, ScalarField};
use lakes::transport::{init_state, step, SchemeConfig, SimState};

/// Status codes shared across the boundary; `LAKES_OK` is zero.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LakesStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Geometry = 4,
    Solver = 5,
    Unstable = 6,
    Io = 7,
    Panic = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|c| *c != '\0').collect();
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(sanitized).unwrap();
    });
}

/// Message of the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lakes_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Version of the library as a static string.
#[no_mangle]
pub extern "C" fn lakes_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

/// A validated scenario: configuration, lake geometry, depth profile and
/// grid spacing.
pub struct LakesScenario {
    config: ScenarioConfig,
    geom: LakeGeometry,
    profile: DepthProfile,
    h: f64,
}

/// A running simulation over one scenario.
pub struct LakesSim {
    grid: Arc<Grid>,
    basis: BiotSavartBasis,
    state: SimState,
    scheme: SchemeConfig,
}

fn scenario_from_text(text: &str) -> Result<LakesScenario, (LakesStatus, String)> {
    let config =
        parse_config_str(text).map_err(|e| (LakesStatus::Config, e.to_string()))?;
    let outer = config
        .outer
        .build()
        .map_err(|e| (LakesStatus::Geometry, e.to_string()))?;
    let islands: Result<Vec<_>, _> = config.islands.iter().map(|s| s.build()).collect();
    let islands = islands.map_err(|e| (LakesStatus::Geometry, e.to_string()))?;
    let geom = LakeGeometry::new(outer, islands)
        .map_err(|e| (LakesStatus::Geometry, e.to_string()))?;
    let h = config
        .grid
        .cell_size(geom.bounding_box.width())
        .ok_or((LakesStatus::Config, "grid: give either h or n".to_string()))?;
    let profile = config.depth.build(h);
    Ok(LakesScenario {
        config,
        geom,
        profile,
        h,
    })
}

fn boxed_scenario(result: Result<LakesScenario, (LakesStatus, String)>) -> *mut LakesScenario {
    match result {
        Ok(s) => Box::into_raw(Box::new(s)),
        Err((_, msg)) => {
            set_error(&msg);
            std::ptr::null_mut()
        }
    }
}

/// Parse and validate a scenario file. Returns null on failure; see
/// [`lakes_last_error`].
///
/// # Safety
/// `path` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn lakes_scenario_load(path: *const c_char) -> *mut LakesScenario {
    if path.is_null() {
        set_error("null path");
        return std::ptr::null_mut();
    }
    let path = match CStr::from_ptr(path).to_str() {
        Ok(p) => p,
        Err(_) => {
            set_error("path is not valid UTF-8");
            return std::ptr::null_mut();
        }
    };
    let text = match std::fs::read_to_string(Path::new(path)) {
        Ok(t) => t,
        Err(e) => {
            set_error(&format!("cannot read {path}: {e}"));
            return std::ptr::null_mut();
        }
    };
    boxed_scenario(scenario_from_text(&text))
}

/// Parse and validate a scenario from TOML text.
///
/// # Safety
/// `text` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn lakes_scenario_from_string(text: *const c_char) -> *mut LakesScenario {
    if text.is_null() {
        set_error("null text");
        return std::ptr::null_mut();
    }
    let text = match CStr::from_ptr(text).to_str() {
        Ok(t) => t,
        Err(_) => {
            set_error("text is not valid UTF-8");
            return std::ptr::null_mut();
        }
    };
    boxed_scenario(scenario_from_text(text))
}

/// Free a scenario handle. Null is ignored.
///
/// # Safety
/// `scenario` must come from a `lakes_scenario_*` constructor and must
/// not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lakes_scenario_free(scenario: *mut LakesScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Build grid, Biot-Savart basis and initial state for a scenario.
/// Returns null on failure.
///
/// # Safety
/// `scenario` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn lakes_sim_new(scenario: *const LakesScenario) -> *mut LakesSim {
    if scenario.is_null() {
        set_error("null scenario");
        return std::ptr::null_mut();
    }
    let sc = &*scenario;
    let built = catch_unwind(AssertUnwindSafe(|| -> Result<LakesSim, String> {
        let grid = build_grid(&sc.geom, &sc.profile, sc.h).map_err(|e| e.to_string())?;
        let basis = build_basis(&grid, &sc.geom).map_err(|e| e.to_string())?;
        let omega0_rule = sc.config.vorticity.build().map_err(|e| e.to_string())?;
        let omega0 = ScalarField::from_fn(&grid, |p: Point| omega0_rule(p));
        let gamma = CirculationVector(sc.config.circulations.clone());
        let state = init_state(&grid, &basis, &omega0, gamma).map_err(|e| e.to_string())?;
        let scheme = SchemeConfig {
            epsilon: sc.config.scheme.epsilon,
            cfl: sc.config.scheme.cfl,
            t_end: sc.config.scheme.t_end,
            output_cadence: sc.config.scheme.t_end / sc.config.scheme.snapshots as f64,
        };
        Ok(LakesSim {
            grid,
            basis,
            state,
            scheme,
        })
    }));
    match built {
        Ok(Ok(sim)) => Box::into_raw(Box::new(sim)),
        Ok(Err(msg)) => {
            set_error(&msg);
            std::ptr::null_mut()
        }
        Err(_) => {
            set_error("panic while building the simulation");
            std::ptr::null_mut()
        }
    }
}

/// Free a simulation handle. Null is ignored.
///
/// # Safety
/// `sim` must come from [`lakes_sim_new`] and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lakes_sim_free(sim: *mut LakesSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Advance the simulation by one CFL-limited step.
///
/// # Safety
/// `sim` must be a live simulation handle.
#[no_mangle]
pub unsafe extern "C" fn lakes_sim_step(sim: *mut LakesSim) -> LakesStatus {
    if sim.is_null() {
        set_error("null simulation");
        return LakesStatus::NullPointer;
    }
    let sim = &mut *sim;
    let outcome = catch_unwind(AssertUnwindSafe(|| {
        step(&sim.state, &sim.grid, &sim.basis, &sim.scheme)
    }));
    match outcome {
        Ok(Ok(next)) => {
            sim.state = next;
            LakesStatus::Ok
        }
        Ok(Err(e)) => {
            set_error(&e.to_string());
            match e {
                lakes::transport::TransportError::VelocityBlowUp { .. }
                | lakes::transport::TransportError::MonotonicityViolated { .. }
                | lakes::transport::TransportError::EnergyLedgerViolated { .. } => {
                    LakesStatus::Unstable
                }
                _ => LakesStatus::Solver,
            }
        }
        Err(_) => {
            set_error("panic during step");
            LakesStatus::Panic
        }
    }
}

/// Step until the simulation time reaches `t` (or the configured end,
/// whichever is smaller).
///
/// # Safety
/// `sim` must be a live simulation handle.
#[no_mangle]
pub unsafe extern "C" fn lakes_sim_advance_to(sim: *mut LakesSim, t: f64) -> LakesStatus {
    if sim.is_null() {
        set_error("null simulation");
        return LakesStatus::NullPointer;
    }
    if !t.is_finite() {
        set_error("target time is not finite");
        return LakesStatus::InvalidArgument;
    }
    let target = t.min((*sim).scheme.t_end);
    loop {
        if (*sim).state.t >= target - 1e-12 {
            return LakesStatus::Ok;
        }
        let status = lakes_sim_step(sim);
        if status != LakesStatus::Ok {
            return status;
        }
    }
}

/// Current simulation time.
///
/// # Safety
/// `sim` must be a live simulation handle.
#[no_mangle]
pub unsafe extern "C" fn lakes_sim_time(sim: *const LakesSim) -> f64 {
    if sim.is_null() {
        return f64::NAN;
    }
    (*sim).state.t
}

/// Number of steps taken so far.
///
/// # Safety
/// `sim` must be a live simulation handle.
#[no_mangle]
pub unsafe extern "C" fn lakes_sim_step_count(sim: *const LakesSim) -> u64 {
    if sim.is_null() {
        return 0;
    }
    (*sim).state.step_count
}

/// `int b omega` over the lake.
///
/// # Safety
/// `sim` must be a live simulation handle.
#[no_mangle]
pub unsafe extern "C" fn lakes_sim_mass(sim: *const LakesSim) -> f64 {
    if sim.is_null() {
        return f64::NAN;
    }
    let sim = &*sim;
    let g = &sim.grid;
    let mut s = 0.0;
    for &c in g.active_cells() {
        s += g.b_reg[c] * sim.state.omega.values[c];
    }
    s * g.h * g.h
}

/// `sup |omega|` over active cells.
///
/// # Safety
/// `sim` must be a live simulation handle.
#[no_mangle]
pub unsafe extern "C" fn lakes_sim_sup_vorticity(sim: *const LakesSim) -> f64 {
    if sim.is_null() {
        return f64::NAN;
    }
    let sim = &*sim;
    sim.grid
        .active_cells()
        .iter()
        .map(|&c| sim.state.omega.values[c].abs())
        .fold(0.0, f64::max)
}

/// Number of islands of the lake.
///
/// # Safety
/// `sim` must be a live simulation handle.
#[no_mangle]
pub unsafe extern "C" fn lakes_sim_island_count(sim: *const LakesSim) -> usize {
    if sim.is_null() {
        return 0;
    }
    (*sim).basis.island_count()
}

/// Measured generalized circulation around island `k`.
///
/// # Safety
/// `sim` must be a live simulation handle and `out` must point to a
/// writable f64.
#[no_mangle]
pub unsafe extern "C" fn lakes_sim_circulation(
    sim: *const LakesSim,
    k: usize,
    out: *mut f64,
) -> LakesStatus {
    if sim.is_null() || out.is_null() {
        set_error("null pointer");
        return LakesStatus::NullPointer;
    }
    let sim = &*sim;
    let g = &sim.grid;
    let mut q = ScalarField::zeros(g);
    for &c in g.active_cells() {
        q.values[c] = g.b_reg[c] * sim.state.omega.values[c];
    }
    match lakes::biot_savart::circulation(g, &sim.basis.cutoffs, &sim.state.v, &q, k) {
        Ok(gamma) => {
            *out = gamma;
            LakesStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            LakesStatus::InvalidArgument
        }
    }
}

/// Grid dimensions and placement.
///
/// # Safety
/// `sim` must be a live simulation handle; out pointers must be writable
/// or null.
#[no_mangle]
pub unsafe extern "C" fn lakes_sim_grid_dims(
    sim: *const LakesSim,
    nx: *mut usize,
    ny: *mut usize,
    h: *mut f64,
    ox: *mut f64,
    oy: *mut f64,
) -> LakesStatus {
    if sim.is_null() {
        set_error("null simulation");
        return LakesStatus::NullPointer;
    }
    let g = &(*sim).grid;
    if !nx.is_null() {
        *nx = g.nx;
    }
    if !ny.is_null() {
        *ny = g.ny;
    }
    if !h.is_null() {
        *h = g.h;
    }
    if !ox.is_null() {
        *ox = g.origin.x;
    }
    if !oy.is_null() {
        *oy = g.origin.y;
    }
    LakesStatus::Ok
}

unsafe fn copy_field(
    sim: *const LakesSim,
    values: impl FnOnce(&LakesSim) -> *const f64,
    buf: *mut f64,
    len: usize,
) -> LakesStatus {
    if sim.is_null() || buf.is_null() {
        set_error("null pointer");
        return LakesStatus::NullPointer;
    }
    let g = &(*sim).grid;
    let need = g.nx * g.ny;
    if len < need {
        set_error(&format!("buffer holds {len} values, need {need}"));
        return LakesStatus::InvalidArgument;
    }
    std::ptr::copy_nonoverlapping(values(&*sim), buf, need);
    LakesStatus::Ok
}

/// Copy the vorticity (row-major, inactive cells zero) into `buf`.
///
/// # Safety
/// `sim` must be a live simulation handle; `buf` must hold `len` f64s.
#[no_mangle]
pub unsafe extern "C" fn lakes_sim_vorticity(
    sim: *const LakesSim,
    buf: *mut f64,
    len: usize,
) -> LakesStatus {
    copy_field(sim, |s| s.state.omega.values.as_ptr(), buf, len)
}

/// Copy the stream function into `buf`.
///
/// # Safety
/// `sim` must be a live simulation handle; `buf` must hold `len` f64s.
#[no_mangle]
pub unsafe extern "C" fn lakes_sim_stream_function(
    sim: *const LakesSim,
    buf: *mut f64,
    len: usize,
) -> LakesStatus {
    copy_field(sim, |s| s.state.psi.values.as_ptr(), buf, len)
}
