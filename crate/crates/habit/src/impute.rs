//! Gap imputation: endpoint mapping, cell-path search, inverse projection,
//! polyline simplification, and timestamp assignment.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cell::{CellError, CellId};
use crate::geo::{haversine_m, interpolate, segment_distance_m, LonLat};
use crate::graph::{GraphError, TrafficGraph};
use crate::model::{GeoPoint, TimedPoint, TimestampMs};

#[derive(Debug, Error)]
pub enum ImputeError {
    #[error("gap endpoint ({lon}, {lat}) is off-network: no node within {rings} rings")]
    OffNetwork { lon: f64, lat: f64, rings: u32 },
    #[error("no path from {start} to {goal} in the traffic graph")]
    Unreachable { start: CellId, goal: CellId },
    #[error("cell {0} is not a graph node")]
    NotANode(CellId),
    #[error("invalid gap: {0}")]
    InvalidGap(String),
    #[error(transparent)]
    Cell(#[from] CellError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// How cell ids are projected back to coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Projection {
    /// Geometric cell center.
    #[serde(rename = "c")]
    Center,
    /// Median of the historical positions observed in the cell. Keeps the
    /// projected point on a historically valid vessel location.
    #[default]
    #[serde(rename = "w")]
    Median,
}

/// Edge cost model for the path search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMode {
    /// Minimize transition count; among minimal-hop paths prefer the largest
    /// total edge weight (the most frequent path).
    #[default]
    Hops,
    /// Edge cost 1/weight, so heavily travelled edges are cheap.
    InverseFrequency,
}

/// What to do when a gap cannot be answered from the graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    /// Propagate the error.
    Error,
    /// Fall back to straight-line interpolation, flagged in the output.
    #[default]
    StraightLine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImputeConfig {
    pub projection: Projection,
    /// Simplification tolerance in meters.
    pub tolerance_m: f64,
    pub cost_mode: CostMode,
    /// Ring limit for snapping off-network endpoints to nodes.
    pub k_max: u32,
    pub fallback: Fallback,
    /// Point spacing for straight-line fallback output, meters.
    pub fallback_spacing_m: f64,
}

impl Default for ImputeConfig {
    fn default() -> Self {
        Self {
            projection: Projection::Median,
            tolerance_m: 250.0,
            cost_mode: CostMode::Hops,
            k_max: 16,
            fallback: Fallback::StraightLine,
            fallback_spacing_m: 250.0,
        }
    }
}

impl ImputeConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.tolerance_m.is_nan() || self.tolerance_m < 0.0 {
            return Err("tolerance_m must be >= 0".into());
        }
        if self.fallback_spacing_m <= 0.0 {
            return Err("fallback_spacing_m must be > 0".into());
        }
        Ok(())
    }
}

/// A missing segment to fill: the last known point before the silence and the
/// first one after it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub vessel_id: String,
    pub trip_id: String,
    pub start: TimedPoint,
    pub end: TimedPoint,
}

impl Gap {
    pub fn new(
        vessel_id: impl Into<String>,
        trip_id: impl Into<String>,
        start: TimedPoint,
        end: TimedPoint,
    ) -> Result<Self, ImputeError> {
        if start.ts >= end.ts {
            return Err(ImputeError::InvalidGap(format!(
                "start ts {} must precede end ts {}",
                start.ts, end.ts
            )));
        }
        Ok(Self {
            vessel_id: vessel_id.into(),
            trip_id: trip_id.into(),
            start,
            end,
        })
    }

    pub fn duration_ms(&self) -> i64 {
        self.end.ts - self.start.ts
    }
}

/// Which generator produced an imputed path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Habit,
    Sli,
}

/// A timestamped point sequence bridging a gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputedPath {
    /// Points including the gap's own start and end.
    pub points: Vec<TimedPoint>,
    /// The cell sequence the points were derived from; empty for SLI.
    pub cell_path: Vec<CellId>,
    pub method: Method,
    /// True when the graph could not answer and the configured fallback ran.
    pub fallback_used: bool,
}

/// Map a gap endpoint to a graph node: its own cell when that is a node,
/// otherwise the nearest node within `k_max` rings.
pub fn map_endpoint<P: LonLat>(
    graph: &TrafficGraph,
    point: &P,
    cfg: &ImputeConfig,
) -> Result<CellId, ImputeError> {
    let cell = CellId::from_point(point, graph.resolution())?;
    match graph.nearest_node(cell, cfg.k_max) {
        Ok(node) => Ok(node),
        Err(GraphError::NodeNotFound { rings, .. }) => Err(ImputeError::OffNetwork {
            lon: point.lon(),
            lat: point.lat(),
            rings,
        }),
        Err(e) => Err(e.into()),
    }
}

/// Project a cell path back to coordinates.
pub fn project_path(
    graph: &TrafficGraph,
    cells: &[CellId],
    projection: Projection,
) -> Result<Vec<GeoPoint>, ImputeError> {
    cells
        .iter()
        .map(|&cell| match projection {
            Projection::Center => Ok(cell.center()),
            Projection::Median => graph
                .node(cell)
                .map(|attrs| attrs.median_position())
                .ok_or(ImputeError::NotANode(cell)),
        })
        .collect()
}

/// Ramer-Douglas-Peucker simplification with great-circle deviation.
///
/// Keeps both endpoints; recursively keeps the first point of maximum
/// deviation whenever that deviation exceeds the tolerance. Every removed
/// point lies within the tolerance of the simplified chain.
pub fn simplify_rdp(points: &[GeoPoint], tolerance_m: f64) -> Vec<GeoPoint> {
    if points.len() <= 2 {
        return points.to_vec();
    }
    let mut keep = vec![false; points.len()];
    keep[0] = true;
    keep[points.len() - 1] = true;

    let mut stack = vec![(0usize, points.len() - 1)];
    while let Some((s, e)) = stack.pop() {
        if e <= s + 1 {
            continue;
        }
        let mut max_dev = f64::NEG_INFINITY;
        let mut max_idx = s + 1;
        for i in s + 1..e {
            let d = segment_distance_m(&points[i], &points[s], &points[e]);
            if d > max_dev {
                max_dev = d;
                max_idx = i;
            }
        }
        if max_dev > tolerance_m {
            keep[max_idx] = true;
            stack.push((s, max_idx));
            stack.push((max_idx, e));
        }
    }

    points
        .iter()
        .zip(&keep)
        .filter_map(|(p, &k)| k.then_some(*p))
        .collect()
}

/// Straight-line interpolation baseline: points along the great circle
/// between the gap endpoints at most `max_spacing_m` apart, timestamps linear
/// in arc length.
pub fn impute_sli(gap: &Gap, max_spacing_m: f64) -> ImputedPath {
    let distance = haversine_m(&gap.start, &gap.end);
    let segments = if distance <= 0.0 {
        1
    } else {
        (distance / max_spacing_m).ceil().max(1.0) as usize
    };

    let mut positions = Vec::with_capacity(segments + 1);
    positions.push(gap.start.position());
    for i in 1..segments {
        let (lon, lat) = interpolate(&gap.start, &gap.end, i as f64 / segments as f64);
        positions.push(GeoPoint::new(lon, lat));
    }
    positions.push(gap.end.position());

    ImputedPath {
        points: assign_timestamps(positions, gap.start, gap.end),
        cell_path: Vec::new(),
        method: Method::Sli,
        fallback_used: false,
    }
}

/// Fill a gap from the traffic graph; the full pipeline composition.
pub fn impute_gap(
    graph: &TrafficGraph,
    gap: &Gap,
    cfg: &ImputeConfig,
) -> Result<ImputedPath, ImputeError> {
    match impute_via_graph(graph, gap, cfg) {
        Ok(path) => Ok(path),
        Err(err @ (ImputeError::OffNetwork { .. } | ImputeError::Unreachable { .. })) => {
            match cfg.fallback {
                Fallback::Error => Err(err),
                Fallback::StraightLine => {
                    let mut path = impute_sli(gap, cfg.fallback_spacing_m);
                    path.fallback_used = true;
                    Ok(path)
                }
            }
        }
        Err(err) => Err(err),
    }
}

fn impute_via_graph(
    graph: &TrafficGraph,
    gap: &Gap,
    cfg: &ImputeConfig,
) -> Result<ImputedPath, ImputeError> {
    let start_cell = map_endpoint(graph, &gap.start, cfg)?;
    let goal_cell = map_endpoint(graph, &gap.end, cfg)?;
    let cells = find_cell_path(graph, start_cell, goal_cell, cfg.cost_mode)?;

    let positions = if cells.len() < 2 {
        vec![gap.start.position(), gap.end.position()]
    } else {
        let projected = project_path(graph, &cells, cfg.projection)?;
        let mut simplified = simplify_rdp(&projected, cfg.tolerance_m);
        *simplified.first_mut().expect("rdp keeps endpoints") = gap.start.position();
        *simplified.last_mut().expect("rdp keeps endpoints") = gap.end.position();
        simplified
    };

    Ok(ImputedPath {
        points: assign_timestamps(positions, gap.start, gap.end),
        cell_path: cells,
        method: Method::Habit,
        fallback_used: false,
    })
}

/// Interpolate timestamps over cumulative arc length, strictly increasing
/// from the gap's start to its end. Consecutive duplicate positions are
/// collapsed first; a zero-length path degenerates to the two endpoints.
fn assign_timestamps(positions: Vec<GeoPoint>, start: TimedPoint, end: TimedPoint) -> Vec<TimedPoint> {
    let mut pos = positions;
    pos.dedup_by(|a, b| a.lon == b.lon && a.lat == b.lat);
    if pos.len() < 2 {
        return vec![start, end];
    }

    let mut cumulative = Vec::with_capacity(pos.len());
    let mut total = 0.0;
    cumulative.push(0.0);
    for w in pos.windows(2) {
        total += haversine_m(&w[0], &w[1]);
        cumulative.push(total);
    }
    let duration = end.ts - start.ts;
    if total <= 0.0 || duration <= pos.len() as i64 {
        // Cannot give every interior point a distinct millisecond.
        return vec![start, end];
    }

    let n = pos.len();
    let mut out = Vec::with_capacity(n);
    out.push(start);
    for (i, p) in pos.iter().enumerate().take(n - 1).skip(1) {
        let raw = start.ts + ((cumulative[i] / total) * duration as f64).round() as TimestampMs;
        let floor = out.last().expect("non-empty").ts + 1;
        let ceil = end.ts - (n - 1 - i) as i64;
        out.push(TimedPoint::new(p.lon, p.lat, raw.clamp(floor, ceil)));
    }
    out.push(end);
    out
}

/// Best path between two graph nodes under the configured cost model; fully
/// deterministic, ties broken by the lexicographically smallest cell-id
/// sequence.
pub fn find_cell_path(
    graph: &TrafficGraph,
    start: CellId,
    goal: CellId,
    cost_mode: CostMode,
) -> Result<Vec<CellId>, ImputeError> {
    for cell in [start, goal] {
        if !graph.contains_node(cell) {
            return Err(ImputeError::NotANode(cell));
        }
    }
    if start == goal {
        return Ok(vec![start]);
    }
    match cost_mode {
        CostMode::Hops => search_hops(graph, start, goal),
        CostMode::InverseFrequency => search_inverse_frequency(graph, start, goal),
    }
}

#[derive(Clone, Copy)]
struct Label<C> {
    cost: C,
    weight: u64,
    parent: Option<CellId>,
}

fn reconstruct<C>(labels: &HashMap<CellId, Label<C>>, goal: CellId) -> Vec<CellId> {
    let mut path = vec![goal];
    let mut node = goal;
    while let Some(parent) = labels.get(&node).and_then(|l| l.parent) {
        path.push(parent);
        node = parent;
    }
    path.reverse();
    path
}

/// True when the path ending at `via` extended by `next` is lexicographically
/// smaller than the stored path ending at `next`. Only called on exact cost
/// ties, where both sequences have equal length.
fn extension_is_lex_smaller<C>(
    labels: &HashMap<CellId, Label<C>>,
    via: CellId,
    next: CellId,
) -> bool {
    let mut candidate = reconstruct(labels, via);
    candidate.push(next);
    candidate < reconstruct(labels, next)
}

/// A* on hop count with a weight-maximizing secondary objective.
///
/// The heuristic ceil(grid_distance / max_edge_span) is admissible for hops
/// but blind to weight, so a settled node may later be reached by an
/// equal-hop, higher-weight path; labels reopen on such improvements and the
/// search drains every entry that could still reach the goal within the best
/// hop count.
fn search_hops(
    graph: &TrafficGraph,
    start: CellId,
    goal: CellId,
) -> Result<Vec<CellId>, ImputeError> {
    let d_max = graph.max_edge_grid_dist().max(1);
    let mut h_cache: HashMap<CellId, u32> = HashMap::new();
    let mut estimate = |cell: CellId| -> u32 {
        *h_cache.entry(cell).or_insert_with(|| match cell.grid_distance(goal) {
            Ok(d) => d.div_ceil(d_max),
            Err(_) => 0,
        })
    };

    #[derive(PartialEq, Eq)]
    struct Entry {
        f: u32,
        hops: u32,
        weight: u64,
        node: CellId,
    }
    impl Ord for Entry {
        // Max-heap: "greater" pops first. Prefer small f, then large weight,
        // then small id; hops last for total consistency with Eq.
        fn cmp(&self, other: &Self) -> Ordering {
            other
                .f
                .cmp(&self.f)
                .then_with(|| self.weight.cmp(&other.weight))
                .then_with(|| other.node.cmp(&self.node))
                .then_with(|| other.hops.cmp(&self.hops))
        }
    }
    impl PartialOrd for Entry {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }

    let mut labels: HashMap<CellId, Label<u32>> = HashMap::new();
    labels.insert(
        start,
        Label {
            cost: 0,
            weight: 0,
            parent: None,
        },
    );
    let mut heap = BinaryHeap::new();
    heap.push(Entry {
        f: estimate(start),
        hops: 0,
        weight: 0,
        node: start,
    });

    while let Some(entry) = heap.pop() {
        if let Some(goal_label) = labels.get(&goal) {
            if entry.f > goal_label.cost {
                continue;
            }
        }
        let current = labels[&entry.node];
        if entry.hops != current.cost || entry.weight != current.weight {
            continue; // stale
        }
        if entry.node == goal {
            continue; // cycling through the goal only adds hops
        }

        for &(next, edge) in graph.out_edges(entry.node) {
            let cand = Label {
                cost: current.cost + 1,
                weight: current.weight + edge.weight,
                parent: Some(entry.node),
            };
            let f = cand.cost + estimate(next);
            if let Some(goal_label) = labels.get(&goal) {
                if f > goal_label.cost {
                    continue;
                }
            }
            let improved = match labels.get(&next) {
                None => true,
                Some(old) => match cand
                    .cost
                    .cmp(&old.cost)
                    .then_with(|| old.weight.cmp(&cand.weight))
                {
                    Ordering::Less => true,
                    Ordering::Greater => false,
                    Ordering::Equal => extension_is_lex_smaller(&labels, entry.node, next),
                },
            };
            if improved {
                labels.insert(next, cand);
                heap.push(Entry {
                    f,
                    hops: cand.cost,
                    weight: cand.weight,
                    node: next,
                });
            }
        }
    }

    if labels.contains_key(&goal) {
        Ok(reconstruct(&labels, goal))
    } else {
        Err(ImputeError::Unreachable { start, goal })
    }
}

/// Uniform-cost search with edge cost 1/weight (zero heuristic).
fn search_inverse_frequency(
    graph: &TrafficGraph,
    start: CellId,
    goal: CellId,
) -> Result<Vec<CellId>, ImputeError> {
    #[derive(PartialEq)]
    struct Entry {
        cost: f64,
        weight: u64,
        node: CellId,
    }
    impl Eq for Entry {}
    impl Ord for Entry {
        fn cmp(&self, other: &Self) -> Ordering {
            other
                .cost
                .total_cmp(&self.cost)
                .then_with(|| self.weight.cmp(&other.weight))
                .then_with(|| other.node.cmp(&self.node))
        }
    }
    impl PartialOrd for Entry {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }

    let mut labels: HashMap<CellId, Label<f64>> = HashMap::new();
    labels.insert(
        start,
        Label {
            cost: 0.0,
            weight: 0,
            parent: None,
        },
    );
    let mut heap = BinaryHeap::new();
    heap.push(Entry {
        cost: 0.0,
        weight: 0,
        node: start,
    });

    while let Some(entry) = heap.pop() {
        if let Some(goal_label) = labels.get(&goal) {
            if entry.cost > goal_label.cost {
                continue;
            }
        }
        let current = labels[&entry.node];
        if entry.cost != current.cost || entry.weight != current.weight {
            continue; // stale
        }
        if entry.node == goal {
            continue;
        }

        for &(next, edge) in graph.out_edges(entry.node) {
            let cand = Label {
                cost: current.cost + 1.0 / edge.weight.max(1) as f64,
                weight: current.weight + edge.weight,
                parent: Some(entry.node),
            };
            if let Some(goal_label) = labels.get(&goal) {
                if cand.cost > goal_label.cost {
                    continue;
                }
            }
            let improved = match labels.get(&next) {
                None => true,
                Some(old) => match cand
                    .cost
                    .total_cmp(&old.cost)
                    .then_with(|| old.weight.cmp(&cand.weight))
                {
                    Ordering::Less => true,
                    Ordering::Greater => false,
                    Ordering::Equal => extension_is_lex_smaller(&labels, entry.node, next),
                },
            };
            if improved {
                labels.insert(next, cand);
                heap.push(Entry {
                    cost: cand.cost,
                    weight: cand.weight,
                    node: next,
                });
            }
        }
    }

    if labels.contains_key(&goal) {
        Ok(reconstruct(&labels, goal))
    } else {
        Err(ImputeError::Unreachable { start, goal })
    }
}
