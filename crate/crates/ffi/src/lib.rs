//! C ABI for `mapf-core`.
//!
//! Every fallible function returns a [`MapfStatus`]; on failure a
//! description is available from [`mapf_last_error_message`] on the same
//! thread. Handles are opaque and must be released with their `_free`
//! function. Strings returned through `char **` are owned by the caller and
//! released with [`mapf_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mapf_core::conflicts::conflict_stats;
use mapf_core::grid::{generate_urban_map, line_of_sight, load_map};
use mapf_core::harness::{
    collision_oracle, emit_report, generate_scenario, read_solution, run_pipeline, write_solution,
    Allocation, PipelineConfig, ReportFormat, RunMetrics, ScenarioSpec,
};
use mapf_core::resolution::solution_cost;
use mapf_core::{
    Cell, Error, Grid, MapGenParams, PathQuery, PlannerKind, SafetyRadius, SolutionSet,
};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapfStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Parse = 3,
    Io = 4,
    /// Some agents have no path; the solution covers the others.
    PlanFailed = 5,
    ResolveAborted = 6,
    OutOfBounds = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapfPlanner {
    Theta = 0,
    Lian = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapfAllocation {
    Type1 = 0,
    Type2 = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapfParams {
    pub planner: MapfPlanner,
    pub delta: i32,
    pub alpha_max: f64,
    pub wait: f64,
    pub radius: f64,
    pub max_refinement_steps: usize,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MapfQuery {
    pub start_i: i32,
    pub start_j: i32,
    pub goal_i: i32,
    pub goal_j: i32,
}

/// Opaque grid handle.
pub struct MapfGrid {
    grid: Grid,
}

/// Opaque solution handle.
pub struct MapfSolution {
    solution: SolutionSet,
    metrics: Option<RunMetrics>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> MapfStatus {
    match e {
        Error::MapParse { .. } | Error::Json(_) | Error::Csv(_) | Error::Solution(_) => {
            MapfStatus::Parse
        }
        Error::Io { .. } => MapfStatus::Io,
        Error::OutOfBounds(_) => MapfStatus::OutOfBounds,
        Error::Resolve(_) => MapfStatus::ResolveAborted,
        _ => MapfStatus::InvalidArgument,
    }
}

fn fail(e: Error) -> MapfStatus {
    let status = status_of(&e);
    set_error(e.to_string());
    status
}

fn guard(f: impl FnOnce() -> MapfStatus) -> MapfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            MapfStatus::Panic
        }
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            set_error(concat!("`", stringify!($p), "` is null"));
            return MapfStatus::NullArgument;
        })+
    };
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, MapfStatus> {
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("`{name}` is not valid UTF-8"));
        MapfStatus::InvalidArgument
    })
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .expect("nul bytes removed")
        .into_raw()
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mapf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn mapf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Defaults: Theta*, delta 5, alpha_max 25, wait 5, radius 1, 100000 refinement steps.
#[no_mangle]
pub extern "C" fn mapf_params_default() -> MapfParams {
    MapfParams {
        planner: MapfPlanner::Theta,
        delta: 5,
        alpha_max: 25.0,
        wait: 5.0,
        radius: 1.0,
        max_refinement_steps: 100_000,
    }
}

fn box_grid(grid: Grid, out: *mut *mut MapfGrid) -> MapfStatus {
    unsafe { *out = Box::into_raw(Box::new(MapfGrid { grid })) };
    MapfStatus::Ok
}

/// Parses a map from text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapf_grid_from_text(
    text: *const c_char,
    out: *mut *mut MapfGrid,
) -> MapfStatus {
    guard(|| {
        non_null!(text, out);
        let text = match str_arg(text, "text") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match load_map(text) {
            Ok(g) => box_grid(g, out),
            Err(e) => fail(e),
        }
    })
}

/// Reads and parses a map file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapf_grid_load(
    path: *const c_char,
    out: *mut *mut MapfGrid,
) -> MapfStatus {
    guard(|| {
        non_null!(path, out);
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => return fail(Error::io(path, e)),
        };
        match load_map(&text) {
            Ok(g) => box_grid(g, out),
            Err(e) => fail(e),
        }
    })
}

/// Generates a city-like map with roughly `density` blocked cells.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapf_grid_generate(
    height: usize,
    width: usize,
    density: f64,
    seed: u64,
    out: *mut *mut MapfGrid,
) -> MapfStatus {
    guard(|| {
        non_null!(out);
        match generate_urban_map(&MapGenParams::new(height, width, density, seed)) {
            Ok(g) => box_grid(g, out),
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `grid` must come from this library and not have been freed. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn mapf_grid_free(grid: *mut MapfGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// # Safety
/// `grid` must be a live handle; `height` and `width` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapf_grid_dims(
    grid: *const MapfGrid,
    height: *mut usize,
    width: *mut usize,
) -> MapfStatus {
    guard(|| {
        non_null!(grid, height, width);
        let g = &(*grid).grid;
        *height = g.height();
        *width = g.width();
        MapfStatus::Ok
    })
}

/// Cells outside the grid report `false`.
///
/// # Safety
/// `grid` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapf_grid_is_traversable(
    grid: *const MapfGrid,
    i: i32,
    j: i32,
    out: *mut bool,
) -> MapfStatus {
    guard(|| {
        non_null!(grid, out);
        *out = (*grid).grid.is_traversable(Cell::new(i, j));
        MapfStatus::Ok
    })
}

/// # Safety
/// `grid` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapf_line_of_sight(
    grid: *const MapfGrid,
    ai: i32,
    aj: i32,
    bi: i32,
    bj: i32,
    out: *mut bool,
) -> MapfStatus {
    guard(|| {
        non_null!(grid, out);
        match line_of_sight(&(*grid).grid, Cell::new(ai, aj), Cell::new(bi, bj)) {
            Ok(v) => {
                *out = v;
                MapfStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

fn radius_arg(r: f64) -> Result<SafetyRadius, MapfStatus> {
    SafetyRadius::new(r).map_err(|e| {
        set_error(e.to_string());
        MapfStatus::InvalidArgument
    })
}

fn pipeline_config(p: &MapfParams) -> Result<PipelineConfig, MapfStatus> {
    let radius = radius_arg(p.radius)?;
    let kind = match p.planner {
        MapfPlanner::Theta => PlannerKind::Theta,
        MapfPlanner::Lian => PlannerKind::Lian,
    };
    let mut cfg = PipelineConfig::new(kind).with_params(p.delta, p.alpha_max, p.wait, radius);
    cfg.resolver.max_refinement_steps = p.max_refinement_steps;
    Ok(cfg)
}

unsafe fn solve_queries(
    grid: &Grid,
    queries: &[PathQuery],
    params: *const MapfParams,
    out: *mut *mut MapfSolution,
) -> MapfStatus {
    let params = if params.is_null() {
        mapf_params_default()
    } else {
        *params
    };
    let cfg = match pipeline_config(&params) {
        Ok(c) => c,
        Err(s) => return s,
    };
    match run_pipeline(grid, queries, &cfg) {
        Ok(run) => {
            let status = if run.plan_failures.is_empty() {
                MapfStatus::Ok
            } else {
                let ids: Vec<String> = run
                    .plan_failures
                    .iter()
                    .map(|(id, e)| format!("agent {id}: {e}"))
                    .collect();
                set_error(ids.join("; "));
                MapfStatus::PlanFailed
            };
            *out = Box::into_raw(Box::new(MapfSolution {
                solution: run.solution,
                metrics: Some(run.metrics),
            }));
            status
        }
        Err(e) => fail(e),
    }
}

/// Plans and resolves one agent per query (agent id = query index).
///
/// On `Ok` and on `PlanFailed` a solution is written to `out`; with
/// `PlanFailed` it omits the agents that could not be planned. `params` may
/// be NULL for defaults.
///
/// # Safety
/// `grid` must be a live handle, `queries` must point to `n_queries`
/// elements (may be NULL when `n_queries` is 0), `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapf_solve(
    grid: *const MapfGrid,
    queries: *const MapfQuery,
    n_queries: usize,
    params: *const MapfParams,
    out: *mut *mut MapfSolution,
) -> MapfStatus {
    guard(|| {
        non_null!(grid, out);
        if queries.is_null() && n_queries > 0 {
            set_error("`queries` is null");
            return MapfStatus::NullArgument;
        }
        let qs: Vec<PathQuery> = if n_queries == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(queries, n_queries)
                .iter()
                .map(|q| {
                    PathQuery::new(
                        Cell::new(q.start_i, q.start_j),
                        Cell::new(q.goal_i, q.goal_j),
                    )
                })
                .collect()
        };
        solve_queries(&(*grid).grid, &qs, params, out)
    })
}

/// Generates a scenario and solves it like [`mapf_solve`].
///
/// # Safety
/// `grid` must be a live handle, `out` must be writable, `params` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn mapf_solve_generated(
    grid: *const MapfGrid,
    allocation: MapfAllocation,
    n_agents: usize,
    border_margin: usize,
    cluster_size: usize,
    seed: u64,
    params: *const MapfParams,
    out: *mut *mut MapfSolution,
) -> MapfStatus {
    guard(|| {
        non_null!(grid, out);
        let alloc = match allocation {
            MapfAllocation::Type1 => Allocation::Type1,
            MapfAllocation::Type2 => Allocation::Type2,
        };
        let spec = ScenarioSpec::new(n_agents, alloc, seed)
            .with_border_margin(border_margin)
            .with_cluster_size(cluster_size);
        match generate_scenario(&(*grid).grid, &spec) {
            Ok(qs) => solve_queries(&(*grid).grid, &qs, params, out),
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `solution` must come from this library and not have been freed. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn mapf_solution_free(solution: *mut MapfSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// # Safety
/// `solution` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapf_solution_agent_count(
    solution: *const MapfSolution,
    out: *mut usize,
) -> MapfStatus {
    guard(|| {
        non_null!(solution, out);
        *out = (*solution).solution.len();
        MapfStatus::Ok
    })
}

/// Agent id, take-off offset and waypoint count of the `index`-th agent
/// in solution order. Any output pointer may be NULL.
///
/// # Safety
/// `solution` must be a live handle; non-NULL outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapf_solution_agent(
    solution: *const MapfSolution,
    index: usize,
    agent_id: *mut usize,
    offset: *mut f64,
    n_waypoints: *mut usize,
) -> MapfStatus {
    guard(|| {
        non_null!(solution);
        let Some(p) = (&*solution).solution.psolutions.get(index) else {
            set_error(format!("agent index {index} out of range"));
            return MapfStatus::OutOfBounds;
        };
        if !agent_id.is_null() {
            *agent_id = p.agent_id;
        }
        if !offset.is_null() {
            *offset = p.offset;
        }
        if !n_waypoints.is_null() {
            *n_waypoints = p.path.len() + 1;
        }
        MapfStatus::Ok
    })
}

/// Copies up to `capacity` waypoints of the `index`-th agent into `buf` as
/// `i, j` pairs (`buf` holds `2 * capacity` integers). `written` receives
/// the number of waypoints copied; if `capacity` is too small nothing is
/// copied, `written` receives the required count and `OutOfBounds` is
/// returned.
///
/// # Safety
/// `solution` must be a live handle, `buf` must hold `2 * capacity`
/// integers, `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapf_solution_waypoints(
    solution: *const MapfSolution,
    index: usize,
    buf: *mut i32,
    capacity: usize,
    written: *mut usize,
) -> MapfStatus {
    guard(|| {
        non_null!(solution, written);
        let Some(p) = (&*solution).solution.psolutions.get(index) else {
            set_error(format!("agent index {index} out of range"));
            return MapfStatus::OutOfBounds;
        };
        let wps = p.path.waypoints();
        if wps.len() > capacity {
            *written = wps.len();
            set_error(format!(
                "buffer holds {capacity} waypoints, {} needed",
                wps.len()
            ));
            return MapfStatus::OutOfBounds;
        }
        non_null!(buf);
        let out = std::slice::from_raw_parts_mut(buf, 2 * capacity);
        for (k, c) in wps.iter().enumerate() {
            out[2 * k] = c.i;
            out[2 * k + 1] = c.j;
        }
        *written = wps.len();
        MapfStatus::Ok
    })
}

/// Sum over agents of offset plus path length.
///
/// # Safety
/// `solution` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapf_solution_cost(
    solution: *const MapfSolution,
    out: *mut f64,
) -> MapfStatus {
    guard(|| {
        non_null!(solution, out);
        *out = solution_cost(&(*solution).solution);
        MapfStatus::Ok
    })
}

/// Solution file JSON (`[{id, offset, waypoints}]`).
///
/// # Safety
/// `solution` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapf_solution_to_json(
    solution: *const MapfSolution,
    out: *mut *mut c_char,
) -> MapfStatus {
    guard(|| {
        non_null!(solution, out);
        match write_solution(&(*solution).solution) {
            Ok(s) => {
                *out = into_c_string(s);
                MapfStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Parses a solution file. The result carries no metrics.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapf_solution_from_json(
    json: *const c_char,
    out: *mut *mut MapfSolution,
) -> MapfStatus {
    guard(|| {
        non_null!(json, out);
        let text = match str_arg(json, "json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match read_solution(text) {
            Ok(solution) => {
                *out = Box::into_raw(Box::new(MapfSolution {
                    solution,
                    metrics: None,
                }));
                MapfStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Run report JSON for a solution produced by a solve call.
///
/// # Safety
/// `solution` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapf_solution_report_json(
    solution: *const MapfSolution,
    out: *mut *mut c_char,
) -> MapfStatus {
    guard(|| {
        non_null!(solution, out);
        let Some(m) = &(*solution).metrics else {
            set_error("solution was not produced by a solve call");
            return MapfStatus::InvalidArgument;
        };
        match emit_report(std::slice::from_ref(m), ReportFormat::Json) {
            Ok(s) => {
                *out = into_c_string(s);
                MapfStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Counts sections crossing obstacles, conflicting section pairs and
/// sampled-oracle violations. Any output pointer may be NULL.
///
/// # Safety
/// `grid` and `solution` must be live handles; non-NULL outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn mapf_verify(
    grid: *const MapfGrid,
    solution: *const MapfSolution,
    radius: f64,
    ds: f64,
    blocked_sections: *mut usize,
    section_conflicts: *mut usize,
    oracle_violations: *mut usize,
) -> MapfStatus {
    guard(|| {
        non_null!(grid, solution);
        let r = match radius_arg(radius) {
            Ok(r) => r,
            Err(s) => return s,
        };
        let (g, ps) = (&(*grid).grid, &(*solution).solution.psolutions);
        let blocked = ps
            .iter()
            .flat_map(|p| p.path.sections())
            .filter(|s| !line_of_sight(g, s.sp(), s.ep()).unwrap_or(false))
            .count();
        let oracle = match collision_oracle(ps, r.get(), ds) {
            Ok(v) => v.len(),
            Err(e) => return fail(e),
        };
        if !blocked_sections.is_null() {
            *blocked_sections = blocked;
        }
        if !section_conflicts.is_null() {
            *section_conflicts = conflict_stats(ps, r).section_conflicts;
        }
        if !oracle_violations.is_null() {
            *oracle_violations = oracle;
        }
        MapfStatus::Ok
    })
}
