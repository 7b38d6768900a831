//! Gap imputation for vessel trajectories from aggregated historical traffic.
//!
//! Positional reports are cleaned and segmented into trips, projected onto an
//! H3 hexagonal grid, and aggregated into a weighted cell-transition graph.
//! A trajectory gap is then filled by mapping its endpoints to graph nodes,
//! searching for the best cell path, projecting cells back to coordinates
//! (cell centers or per-cell data medians), simplifying the polyline, and
//! interpolating timestamps. An evaluation harness measures accuracy against
//! held-out trips with synthetic gaps.
//!
//! The `habit` binary exposes the pipeline as subcommands:
//! `ingest`, `build`, `impute`, `eval`, `export-geojson`.
//!
//! ```
//! use habit::aggregate::{aggregate_cells, aggregate_transitions, DistinctMode};
//! use habit::impute::{impute_gap, Gap, ImputeConfig};
//! use habit::model::TimedPoint;
//! use habit::segment::filter_micro_trips;
//! use habit::synth::{corridor_trips, CorridorSpec};
//! use habit::{BuildMetadata, Resolution, TrafficGraph};
//!
//! // Aggregate a corpus (here synthetic) into a traffic graph.
//! let spec = CorridorSpec { n_trips: 8, ..Default::default() };
//! let r9 = Resolution::new(9)?;
//! let trips = filter_micro_trips(corridor_trips(&spec), r9);
//! let cells = aggregate_cells(&trips, r9, DistinctMode::Exact)?;
//! let (transitions, _) = aggregate_transitions(&trips, r9, DistinctMode::Exact)?;
//! let graph = TrafficGraph::build(&cells, &transitions, BuildMetadata::default())?;
//!
//! // Fill a gap between two known positions.
//! let (a, b) = (&trips[0].points[10], &trips[0].points[60]);
//! let gap = Gap::new(
//!     a.vessel_id.clone(),
//!     trips[0].trip_id.clone(),
//!     TimedPoint::new(a.lon, a.lat, a.ts),
//!     TimedPoint::new(b.lon, b.lat, b.ts),
//! )?;
//! let path = impute_gap(&graph, &gap, &ImputeConfig::default())?;
//! assert_eq!(path.points.first().unwrap().ts, a.ts);
//! assert_eq!(path.points.last().unwrap().ts, b.ts);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod aggregate;
pub mod cell;
pub mod cli;
pub mod config;
pub mod eval;
pub mod geo;
pub mod geojson;
pub mod graph;
pub mod impute;
pub mod model;
pub mod segment;
pub mod sketch;
pub mod synth;

pub use aggregate::{aggregate_cells, aggregate_transitions, assign_cell, CellStats, DistinctMode, TransitionStats};
pub use cell::{CellError, CellId, Resolution};
pub use graph::{BuildMetadata, EdgeAttrs, GraphError, NodeAttrs, TrafficGraph};
pub use impute::{
    find_cell_path, impute_gap, impute_sli, map_endpoint, project_path, simplify_rdp, CostMode,
    Fallback, Gap, ImputeConfig, ImputeError, ImputedPath, Method, Projection,
};
pub use model::{AisRecord, GeoPoint, InputSchema, RejectReason, TimedPoint, TimestampMs};
pub use segment::{
    clean_stream, detect_stops, filter_micro_trips, segment_trips, SegmenterConfig, Trip,
};
