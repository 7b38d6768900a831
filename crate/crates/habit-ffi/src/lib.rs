//! C ABI over the core library: load a traffic graph file, impute gaps, and
//! read back the resulting paths through opaque handles.
//!
//! Conventions: functions return [`HabitStatus`]; results come out through
//! out-pointers. A failing call stores a message retrievable on the same
//! thread with [`habit_last_error_message`]. Handles are freed exactly once
//! with their `_free` function; passing null anywhere is reported, not UB.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use habit::impute::{impute_gap, CostMode, Fallback, Gap, ImputeConfig, ImputeError, Method, Projection};
use habit::model::TimedPoint;
use habit::TrafficGraph;

/// Result code of an FFI call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum HabitStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Utf8Error = 3,
    LoadFailed = 4,
    OffNetwork = 5,
    Unreachable = 6,
    InvalidGap = 7,
    IndexOutOfRange = 8,
    InternalError = 9,
}

/// Inverse projection choice.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum HabitProjection {
    Center = 0,
    Median = 1,
}

/// Path-search cost model.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum HabitCostMode {
    Hops = 0,
    InverseFrequency = 1,
}

/// Behavior when the graph cannot answer a gap.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum HabitFallback {
    Error = 0,
    StraightLine = 1,
}

/// Which generator produced a path.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum HabitMethod {
    Habit = 0,
    Sli = 1,
}

/// Imputation settings; get defaults from `habit_impute_options_default`.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct HabitImputeOptions {
    pub projection: HabitProjection,
    /// Simplification tolerance, meters (>= 0).
    pub tolerance_m: f64,
    pub cost_mode: HabitCostMode,
    /// Ring limit when snapping endpoints to graph nodes.
    pub k_max: u32,
    pub fallback: HabitFallback,
    /// Point spacing of straight-line fallback output, meters (> 0).
    pub fallback_spacing_m: f64,
}

/// An immutable traffic graph loaded from a file.
pub struct HabitGraph(TrafficGraph);

/// An imputed, timestamped path.
pub struct HabitPath(habit::impute::ImputedPath);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: impl Into<String>) {
    let message = message.into().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(message).unwrap_or_default();
    });
}

fn fail(status: HabitStatus, message: impl Into<String>) -> HabitStatus {
    set_last_error(message);
    status
}

/// Message of the most recent failing call on this thread. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn habit_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Default imputation options: median projection, 250 m tolerance, hop-count
/// cost, 16-ring snapping, straight-line fallback at 250 m spacing.
#[no_mangle]
pub extern "C" fn habit_impute_options_default() -> HabitImputeOptions {
    HabitImputeOptions {
        projection: HabitProjection::Median,
        tolerance_m: 250.0,
        cost_mode: HabitCostMode::Hops,
        k_max: 16,
        fallback: HabitFallback::StraightLine,
        fallback_spacing_m: 250.0,
    }
}

/// Load a graph file produced by the `habit build` pipeline.
///
/// On success writes a handle to `out_graph`; free it with
/// `habit_graph_free`.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out_graph` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn habit_graph_load(
    path: *const c_char,
    out_graph: *mut *mut HabitGraph,
) -> HabitStatus {
    if path.is_null() || out_graph.is_null() {
        return fail(HabitStatus::NullArgument, "path and out_graph must be non-null");
    }
    let path_str = match unsafe { CStr::from_ptr(path) }.to_str() {
        Ok(s) => s,
        Err(_) => return fail(HabitStatus::Utf8Error, "path is not valid UTF-8"),
    };
    let result = catch_unwind(|| TrafficGraph::load_from_path(path_str));
    match result {
        Ok(Ok(graph)) => {
            unsafe { *out_graph = Box::into_raw(Box::new(HabitGraph(graph))) };
            HabitStatus::Ok
        }
        Ok(Err(e)) => fail(HabitStatus::LoadFailed, e.to_string()),
        Err(_) => fail(HabitStatus::InternalError, "panic while loading graph"),
    }
}

/// Free a graph handle. Null is a no-op.
///
/// # Safety
/// `graph` must come from `habit_graph_load` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn habit_graph_free(graph: *mut HabitGraph) {
    if !graph.is_null() {
        drop(unsafe { Box::from_raw(graph) });
    }
}

/// H3 resolution of the graph, or 255 for a null handle.
///
/// # Safety
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn habit_graph_resolution(graph: *const HabitGraph) -> u8 {
    match unsafe { graph.as_ref() } {
        Some(g) => g.0.resolution().value(),
        None => u8::MAX,
    }
}

/// # Safety
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn habit_graph_node_count(graph: *const HabitGraph) -> u64 {
    unsafe { graph.as_ref() }.map_or(0, |g| g.0.node_count() as u64)
}

/// # Safety
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn habit_graph_edge_count(graph: *const HabitGraph) -> u64 {
    unsafe { graph.as_ref() }.map_or(0, |g| g.0.edge_count() as u64)
}

fn convert_options(options: &HabitImputeOptions) -> ImputeConfig {
    ImputeConfig {
        projection: match options.projection {
            HabitProjection::Center => Projection::Center,
            HabitProjection::Median => Projection::Median,
        },
        tolerance_m: options.tolerance_m,
        cost_mode: match options.cost_mode {
            HabitCostMode::Hops => CostMode::Hops,
            HabitCostMode::InverseFrequency => CostMode::InverseFrequency,
        },
        k_max: options.k_max,
        fallback: match options.fallback {
            HabitFallback::Error => Fallback::Error,
            HabitFallback::StraightLine => Fallback::StraightLine,
        },
        fallback_spacing_m: options.fallback_spacing_m,
    }
}

/// Impute the gap between two timestamped positions (UTC milliseconds).
///
/// `options` may be null for defaults. On success writes a path handle to
/// `out_path`; free it with `habit_path_free`.
///
/// # Safety
/// `graph` must be a live handle; `options` null or valid; `out_path` valid.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn habit_impute(
    graph: *const HabitGraph,
    start_lon: f64,
    start_lat: f64,
    start_ts_ms: i64,
    end_lon: f64,
    end_lat: f64,
    end_ts_ms: i64,
    options: *const HabitImputeOptions,
    out_path: *mut *mut HabitPath,
) -> HabitStatus {
    let Some(graph) = (unsafe { graph.as_ref() }) else {
        return fail(HabitStatus::NullArgument, "graph must be non-null");
    };
    if out_path.is_null() {
        return fail(HabitStatus::NullArgument, "out_path must be non-null");
    }
    let config = match unsafe { options.as_ref() } {
        Some(options) => convert_options(options),
        None => ImputeConfig::default(),
    };
    if let Err(message) = config.validate() {
        return fail(HabitStatus::InvalidArgument, message);
    }

    let gap = match Gap::new(
        "",
        "",
        TimedPoint::new(start_lon, start_lat, start_ts_ms),
        TimedPoint::new(end_lon, end_lat, end_ts_ms),
    ) {
        Ok(gap) => gap,
        Err(e) => return fail(HabitStatus::InvalidGap, e.to_string()),
    };

    let result = catch_unwind(AssertUnwindSafe(|| impute_gap(&graph.0, &gap, &config)));
    match result {
        Ok(Ok(path)) => {
            unsafe { *out_path = Box::into_raw(Box::new(HabitPath(path))) };
            HabitStatus::Ok
        }
        Ok(Err(e)) => {
            let status = match &e {
                ImputeError::OffNetwork { .. } => HabitStatus::OffNetwork,
                ImputeError::Unreachable { .. } => HabitStatus::Unreachable,
                ImputeError::InvalidGap(_) => HabitStatus::InvalidGap,
                _ => HabitStatus::InternalError,
            };
            fail(status, e.to_string())
        }
        Err(_) => fail(HabitStatus::InternalError, "panic during imputation"),
    }
}

/// Number of points in the path (0 for a null handle).
///
/// # Safety
/// `path` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn habit_path_len(path: *const HabitPath) -> usize {
    unsafe { path.as_ref() }.map_or(0, |p| p.0.points.len())
}

/// Read one point of the path into the out-parameters.
///
/// # Safety
/// `path` must be null or a live handle; out-parameters must be valid.
#[no_mangle]
pub unsafe extern "C" fn habit_path_point(
    path: *const HabitPath,
    index: usize,
    out_lon: *mut f64,
    out_lat: *mut f64,
    out_ts_ms: *mut i64,
) -> HabitStatus {
    let Some(path) = (unsafe { path.as_ref() }) else {
        return fail(HabitStatus::NullArgument, "path must be non-null");
    };
    if out_lon.is_null() || out_lat.is_null() || out_ts_ms.is_null() {
        return fail(HabitStatus::NullArgument, "out-parameters must be non-null");
    }
    let Some(point) = path.0.points.get(index) else {
        return fail(
            HabitStatus::IndexOutOfRange,
            format!("point index {index} out of range ({} points)", path.0.points.len()),
        );
    };
    unsafe {
        *out_lon = point.lon;
        *out_lat = point.lat;
        *out_ts_ms = point.ts;
    }
    HabitStatus::Ok
}

/// Which generator produced the path. Null handles report the baseline.
///
/// # Safety
/// `path` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn habit_path_method(path: *const HabitPath) -> HabitMethod {
    match unsafe { path.as_ref() }.map(|p| p.0.method) {
        Some(Method::Habit) => HabitMethod::Habit,
        _ => HabitMethod::Sli,
    }
}

/// True when the configured fallback produced the path.
///
/// # Safety
/// `path` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn habit_path_fallback_used(path: *const HabitPath) -> bool {
    unsafe { path.as_ref() }.is_some_and(|p| p.0.fallback_used)
}

/// Number of cells in the path's cell sequence (0 for SLI paths).
///
/// # Safety
/// `path` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn habit_path_cell_count(path: *const HabitPath) -> usize {
    unsafe { path.as_ref() }.map_or(0, |p| p.0.cell_path.len())
}

/// Read one H3 cell index of the path's cell sequence.
///
/// # Safety
/// `path` must be null or a live handle; `out_cell` must be valid.
#[no_mangle]
pub unsafe extern "C" fn habit_path_cell(
    path: *const HabitPath,
    index: usize,
    out_cell: *mut u64,
) -> HabitStatus {
    let Some(path) = (unsafe { path.as_ref() }) else {
        return fail(HabitStatus::NullArgument, "path must be non-null");
    };
    if out_cell.is_null() {
        return fail(HabitStatus::NullArgument, "out_cell must be non-null");
    }
    let Some(cell) = path.0.cell_path.get(index) else {
        return fail(
            HabitStatus::IndexOutOfRange,
            format!("cell index {index} out of range ({} cells)", path.0.cell_path.len()),
        );
    };
    unsafe { *out_cell = cell.as_u64() };
    HabitStatus::Ok
}

/// Free a path handle. Null is a no-op.
///
/// # Safety
/// `path` must come from `habit_impute` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn habit_path_free(path: *mut HabitPath) {
    if !path.is_null() {
        drop(unsafe { Box::from_raw(path) });
    }
}
