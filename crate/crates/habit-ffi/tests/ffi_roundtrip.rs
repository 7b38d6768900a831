//! Exercise the C ABI end to end: build and save a graph with the core
//! library, then load and query it exclusively through the FFI surface.

use std::ffi::CString;
use std::ptr;

use habit::aggregate::{aggregate_cells, aggregate_transitions, DistinctMode};
use habit::segment::filter_micro_trips;
use habit::synth::{corridor_trips, CorridorSpec};
use habit::{BuildMetadata, Resolution, TrafficGraph};
use habit_ffi::*;

fn build_graph_file(dir: &std::path::Path) -> (std::path::PathBuf, TrafficGraph, Vec<habit::Trip>) {
    let spec = CorridorSpec {
        n_trips: 12,
        trip_duration_min: 80.0,
        ..CorridorSpec::default()
    };
    let trips = corridor_trips(&spec);
    let r9 = Resolution::new(9).unwrap();
    let filtered = filter_micro_trips(trips.clone(), r9);
    let cells = aggregate_cells(&filtered, r9, DistinctMode::Exact).unwrap();
    let (transitions, _) = aggregate_transitions(&filtered, r9, DistinctMode::Exact).unwrap();
    let graph = TrafficGraph::build(&cells, &transitions, BuildMetadata::default()).unwrap();
    let path = dir.join("corridor.hbg");
    graph.save_to_path(&path).unwrap();
    (path, graph, trips)
}

fn last_error() -> String {
    let ptr = habit_last_error_message();
    assert!(!ptr.is_null());
    unsafe { std::ffi::CStr::from_ptr(ptr) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn load_impute_and_read_back() {
    let dir = tempfile::tempdir().unwrap();
    let (path, graph, trips) = build_graph_file(dir.path());
    let c_path = CString::new(path.to_str().unwrap()).unwrap();

    unsafe {
        let mut handle: *mut HabitGraph = ptr::null_mut();
        assert_eq!(habit_graph_load(c_path.as_ptr(), &mut handle), HabitStatus::Ok);
        assert!(!handle.is_null());
        assert_eq!(habit_graph_resolution(handle), 9);
        assert_eq!(habit_graph_node_count(handle), graph.node_count() as u64);
        assert_eq!(habit_graph_edge_count(handle), graph.edge_count() as u64);

        // A gap along the first trip.
        let trip = &trips[0];
        let a = &trip.points[5];
        let b = &trip.points[trip.points.len() - 5];
        let options = habit_impute_options_default();
        let mut path_handle: *mut HabitPath = ptr::null_mut();
        let status = habit_impute(
            handle, a.lon, a.lat, a.ts, b.lon, b.lat, b.ts, &options, &mut path_handle,
        );
        assert_eq!(status, HabitStatus::Ok);
        assert_eq!(habit_path_method(path_handle), HabitMethod::Habit);
        assert!(!habit_path_fallback_used(path_handle));

        let n = habit_path_len(path_handle);
        assert!(n >= 2);
        let mut last_ts = i64::MIN;
        for i in 0..n {
            let (mut lon, mut lat, mut ts) = (0.0, 0.0, 0i64);
            assert_eq!(
                habit_path_point(path_handle, i, &mut lon, &mut lat, &mut ts),
                HabitStatus::Ok
            );
            assert!(ts > last_ts, "timestamps strictly increase");
            last_ts = ts;
            if i == 0 {
                assert_eq!((lon, lat, ts), (a.lon, a.lat, a.ts));
            }
            if i == n - 1 {
                assert_eq!((lon, lat, ts), (b.lon, b.lat, b.ts));
            }
        }

        let cells = habit_path_cell_count(path_handle);
        assert!(cells >= 1);
        let mut cell = 0u64;
        assert_eq!(habit_path_cell(path_handle, 0, &mut cell), HabitStatus::Ok);
        assert!(habit::CellId::from_u64(cell).is_ok());
        assert_eq!(
            habit_path_cell(path_handle, cells, &mut cell),
            HabitStatus::IndexOutOfRange
        );

        habit_path_free(path_handle);
        habit_graph_free(handle);
    }
}

#[test]
fn load_errors_are_reported_with_messages() {
    let missing = CString::new("/nonexistent/graph.hbg").unwrap();
    unsafe {
        let mut handle: *mut HabitGraph = ptr::null_mut();
        assert_eq!(
            habit_graph_load(missing.as_ptr(), &mut handle),
            HabitStatus::LoadFailed
        );
        assert!(handle.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(
            habit_graph_load(ptr::null(), &mut handle),
            HabitStatus::NullArgument
        );
    }
}

#[test]
fn corrupt_file_fails_to_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("junk.hbg");
    std::fs::write(&path, b"not a graph at all").unwrap();
    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    unsafe {
        let mut handle: *mut HabitGraph = ptr::null_mut();
        assert_eq!(
            habit_graph_load(c_path.as_ptr(), &mut handle),
            HabitStatus::LoadFailed
        );
    }
    assert!(last_error().contains("corrupt"));
}

#[test]
fn invalid_gap_and_off_network_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let (path, _, trips) = build_graph_file(dir.path());
    let c_path = CString::new(path.to_str().unwrap()).unwrap();

    unsafe {
        let mut handle: *mut HabitGraph = ptr::null_mut();
        assert_eq!(habit_graph_load(c_path.as_ptr(), &mut handle), HabitStatus::Ok);

        let a = &trips[0].points[0];
        let mut path_handle: *mut HabitPath = ptr::null_mut();

        // end before start
        let status = habit_impute(
            handle, a.lon, a.lat, a.ts, a.lon, a.lat, a.ts - 1000, ptr::null(), &mut path_handle,
        );
        assert_eq!(status, HabitStatus::InvalidGap);

        // far off the network with fallback disabled
        let mut options = habit_impute_options_default();
        options.fallback = HabitFallback::Error;
        options.k_max = 2;
        let status = habit_impute(
            handle, -30.0, 40.0, a.ts, -29.5, 40.2, a.ts + 3_600_000, &options, &mut path_handle,
        );
        assert_eq!(status, HabitStatus::OffNetwork);
        assert!(last_error().contains("off-network"));

        // same gap with the straight-line fallback
        options.fallback = HabitFallback::StraightLine;
        let status = habit_impute(
            handle, -30.0, 40.0, a.ts, -29.5, 40.2, a.ts + 3_600_000, &options, &mut path_handle,
        );
        assert_eq!(status, HabitStatus::Ok);
        assert_eq!(habit_path_method(path_handle), HabitMethod::Sli);
        assert!(habit_path_fallback_used(path_handle));
        assert_eq!(habit_path_cell_count(path_handle), 0);

        habit_path_free(path_handle);
        habit_graph_free(handle);
    }
}

#[test]
fn generated_header_declares_the_full_surface() {
    let header = std::fs::read_to_string(format!(
        "{}/include/habit.h",
        env!("CARGO_MANIFEST_DIR")
    ))
    .expect("committed header exists");
    for symbol in [
        "habit_graph_load",
        "habit_graph_free",
        "habit_graph_resolution",
        "habit_graph_node_count",
        "habit_graph_edge_count",
        "habit_impute_options_default",
        "habit_impute",
        "habit_path_len",
        "habit_path_point",
        "habit_path_method",
        "habit_path_fallback_used",
        "habit_path_cell_count",
        "habit_path_cell",
        "habit_path_free",
        "habit_last_error_message",
        "typedef struct HabitGraph HabitGraph",
        "typedef struct HabitPath HabitPath",
    ] {
        assert!(header.contains(symbol), "header is missing `{symbol}`");
    }
}
