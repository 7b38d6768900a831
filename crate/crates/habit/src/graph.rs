//! The weighted directed cell-transition graph: construction from aggregated
//! statistics, a versioned binary persistence format, and node lookups.
//!
//! The graph is immutable after build; concurrent readers need no
//! synchronization.

use std::collections::{BTreeMap, HashMap};
use std::io::{self, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::{CellStats, TransitionStats};
use crate::cell::{CellError, CellId, Resolution};
use crate::geo::haversine_m;
use crate::model::GeoPoint;

/// File magic for the binary graph container.
const MAGIC: &[u8; 4] = b"HBGR";
/// Current format version.
const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("transition endpoint {0} has no cell statistics")]
    MissingCellStats(CellId),
    #[error("no graph node within {rings} rings of cell {cell}")]
    NodeNotFound { cell: CellId, rings: u32 },
    #[error("cell {cell} has resolution {actual}, graph is at {expected}")]
    ResolutionMismatch {
        cell: CellId,
        actual: Resolution,
        expected: Resolution,
    },
    #[error("corrupt graph file: {0}")]
    Corrupt(String),
    #[error("unsupported graph format version {0} (expected {FORMAT_VERSION})")]
    Version(u16),
    #[error(transparent)]
    Cell(#[from] CellError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Node attributes, copied verbatim from the cell statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeAttrs {
    pub median_lon: f64,
    pub median_lat: f64,
    pub msg_count: u64,
    pub distinct_vessels: u64,
    pub median_sog: Option<f64>,
    pub median_cog: Option<f64>,
}

impl NodeAttrs {
    pub fn median_position(&self) -> GeoPoint {
        GeoPoint::new(self.median_lon, self.median_lat)
    }
}

/// Edge attributes: transition frequency and grid span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeAttrs {
    /// Number of distinct trips that made this transition.
    pub weight: u64,
    /// Grid distance between the endpoints, in cells.
    pub grid_dist: u32,
}

/// Provenance recorded alongside the graph.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BuildMetadata {
    /// Free-form description of the source corpus.
    pub source: String,
    /// Trips aggregated into the graph.
    pub trip_count: u64,
    /// Positional reports aggregated into the graph.
    pub record_count: u64,
    /// Build wall-clock time, Unix milliseconds. Excluded from determinism
    /// guarantees.
    pub built_at_ms: i64,
}

/// Weighted directed graph over H3 cells; the queryable imputation model.
#[derive(Debug, Clone)]
pub struct TrafficGraph {
    resolution: Resolution,
    nodes: BTreeMap<CellId, NodeAttrs>,
    edges: BTreeMap<(CellId, CellId), EdgeAttrs>,
    pub metadata: BuildMetadata,
    /// Outgoing adjacency, neighbor lists sorted by cell id.
    adjacency: HashMap<CellId, Vec<(CellId, EdgeAttrs)>>,
    /// Largest grid distance spanned by any edge; 1 for an empty graph.
    max_edge_grid_dist: u32,
}

impl TrafficGraph {
    /// Assemble a graph from aggregated statistics.
    ///
    /// Nodes are the cells present in the transition list; cells with
    /// statistics but no transitions are excluded. Every transition endpoint
    /// must have cell statistics.
    pub fn build(
        cells: &BTreeMap<CellId, CellStats>,
        transitions: &BTreeMap<(CellId, CellId), TransitionStats>,
        metadata: BuildMetadata,
    ) -> Result<Self, GraphError> {
        let mut nodes = BTreeMap::new();
        let mut edges = BTreeMap::new();

        for ((from, to), t) in transitions {
            debug_assert!(from != to, "self-transitions are filtered during aggregation");
            for endpoint in [from, to] {
                if !nodes.contains_key(endpoint) {
                    let stats = cells
                        .get(endpoint)
                        .ok_or(GraphError::MissingCellStats(*endpoint))?;
                    nodes.insert(
                        *endpoint,
                        NodeAttrs {
                            median_lon: stats.median_lon,
                            median_lat: stats.median_lat,
                            msg_count: stats.msg_count,
                            distinct_vessels: stats.distinct_vessels,
                            median_sog: stats.median_sog,
                            median_cog: stats.median_cog,
                        },
                    );
                }
            }
            edges.insert(
                (*from, *to),
                EdgeAttrs {
                    weight: t.trip_count,
                    grid_dist: t.grid_dist,
                },
            );
        }

        let resolution = nodes
            .keys()
            .next()
            .map(|c| c.resolution())
            .or_else(|| cells.keys().next().map(|c| c.resolution()))
            .unwrap_or(Resolution::new(9).expect("9 is valid"));

        Self::assemble(resolution, nodes, edges, metadata)
    }

    fn assemble(
        resolution: Resolution,
        nodes: BTreeMap<CellId, NodeAttrs>,
        edges: BTreeMap<(CellId, CellId), EdgeAttrs>,
        metadata: BuildMetadata,
    ) -> Result<Self, GraphError> {
        for cell in nodes.keys() {
            if cell.resolution() != resolution {
                return Err(GraphError::ResolutionMismatch {
                    cell: *cell,
                    actual: cell.resolution(),
                    expected: resolution,
                });
            }
        }
        for (from, to) in edges.keys() {
            if from == to {
                return Err(GraphError::Corrupt(format!("self-loop edge on {from}")));
            }
            for endpoint in [from, to] {
                if !nodes.contains_key(endpoint) {
                    return Err(GraphError::MissingCellStats(*endpoint));
                }
            }
        }

        let mut adjacency: HashMap<CellId, Vec<(CellId, EdgeAttrs)>> = HashMap::new();
        let mut max_edge_grid_dist = 1;
        for (&(from, to), &attrs) in &edges {
            adjacency.entry(from).or_default().push((to, attrs));
            max_edge_grid_dist = max_edge_grid_dist.max(attrs.grid_dist);
        }
        // BTreeMap iteration already yields neighbors sorted by (from, to),
        // so each adjacency list is id-sorted; keep that invariant explicit.
        debug_assert!(adjacency
            .values()
            .all(|v| v.windows(2).all(|w| w[0].0 < w[1].0)));

        Ok(Self {
            resolution,
            nodes,
            edges,
            metadata,
            adjacency,
            max_edge_grid_dist,
        })
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains_node(&self, cell: CellId) -> bool {
        self.nodes.contains_key(&cell)
    }

    pub fn node(&self, cell: CellId) -> Option<&NodeAttrs> {
        self.nodes.get(&cell)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (CellId, &NodeAttrs)> {
        self.nodes.iter().map(|(c, a)| (*c, a))
    }

    pub fn edges(&self) -> impl Iterator<Item = (CellId, CellId, EdgeAttrs)> + '_ {
        self.edges.iter().map(|(&(f, t), &a)| (f, t, a))
    }

    pub fn edge(&self, from: CellId, to: CellId) -> Option<EdgeAttrs> {
        self.edges.get(&(from, to)).copied()
    }

    /// Outgoing neighbors of `cell`, sorted by cell id. Empty for non-nodes.
    pub fn out_edges(&self, cell: CellId) -> &[(CellId, EdgeAttrs)] {
        self.adjacency.get(&cell).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Largest grid distance spanned by a single edge (at least 1).
    pub fn max_edge_grid_dist(&self) -> u32 {
        self.max_edge_grid_dist
    }

    /// H3 grid distance between two cells of the graph's resolution.
    pub fn grid_distance(&self, a: CellId, b: CellId) -> Result<u32, CellError> {
        a.grid_distance(b)
    }

    /// Resolve a cell to a graph node: the cell itself when it is a node,
    /// otherwise the node in the smallest non-empty ring around it, ties
    /// broken by geodesic distance from the query cell's center to the
    /// candidate's median position, then by ascending cell id.
    pub fn nearest_node(&self, cell: CellId, k_max: u32) -> Result<CellId, GraphError> {
        if cell.resolution() != self.resolution {
            return Err(GraphError::ResolutionMismatch {
                cell,
                actual: cell.resolution(),
                expected: self.resolution,
            });
        }
        if self.contains_node(cell) {
            return Ok(cell);
        }

        let origin = cell.center();
        let mut by_ring: BTreeMap<u32, Vec<CellId>> = BTreeMap::new();
        for (candidate, ring) in cell.disk_with_distances(k_max) {
            if ring > 0 && self.contains_node(candidate) {
                by_ring.entry(ring).or_default().push(candidate);
            }
        }
        let Some((_, candidates)) = by_ring.into_iter().next() else {
            return Err(GraphError::NodeNotFound {
                cell,
                rings: k_max,
            });
        };
        let best = candidates
            .into_iter()
            .map(|c| {
                let median = self.nodes[&c].median_position();
                (haversine_m(&origin, &median), c)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)))
            .map(|(_, c)| c)
            .expect("ring is non-empty");
        Ok(best)
    }

    /// Serialize to the versioned binary container. Byte-identical output for
    /// identical graphs (the build timestamp lives inside the metadata and is
    /// the caller's to pin).
    pub fn save<W: Write>(&self, mut w: W) -> Result<(), GraphError> {
        let meta = serde_json::to_vec(&self.metadata)
            .map_err(|e| GraphError::Corrupt(format!("metadata serialization: {e}")))?;

        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&[self.resolution.value(), 0])?;
        w.write_all(&(meta.len() as u32).to_le_bytes())?;
        w.write_all(&meta)?;

        let opt = |v: Option<f64>| v.unwrap_or(f64::NAN);
        w.write_all(&(self.nodes.len() as u64).to_le_bytes())?;
        for (cell, attrs) in &self.nodes {
            w.write_all(&cell.as_u64().to_le_bytes())?;
            w.write_all(&attrs.median_lon.to_le_bytes())?;
            w.write_all(&attrs.median_lat.to_le_bytes())?;
            w.write_all(&attrs.msg_count.to_le_bytes())?;
            w.write_all(&attrs.distinct_vessels.to_le_bytes())?;
            w.write_all(&opt(attrs.median_sog).to_le_bytes())?;
            w.write_all(&opt(attrs.median_cog).to_le_bytes())?;
        }

        w.write_all(&(self.edges.len() as u64).to_le_bytes())?;
        for ((from, to), attrs) in &self.edges {
            w.write_all(&from.as_u64().to_le_bytes())?;
            w.write_all(&to.as_u64().to_le_bytes())?;
            w.write_all(&attrs.weight.to_le_bytes())?;
            w.write_all(&attrs.grid_dist.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn save_to_path<P: AsRef<Path>>(&self, path: P) -> Result<(), GraphError> {
        let file = std::fs::File::create(path)?;
        let mut buf = io::BufWriter::new(file);
        self.save(&mut buf)?;
        buf.flush()?;
        Ok(())
    }

    /// Load a graph saved by [`TrafficGraph::save`], verifying magic,
    /// version, and referential integrity.
    pub fn load<R: Read>(mut r: R) -> Result<Self, GraphError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| GraphError::Corrupt("file too short for header".into()))?;
        if &magic != MAGIC {
            return Err(GraphError::Corrupt("bad magic bytes".into()));
        }
        let version = u16::from_le_bytes(read_array(&mut r)?);
        if version != FORMAT_VERSION {
            return Err(GraphError::Version(version));
        }
        let [res_byte, _pad] = read_array(&mut r)?;
        let resolution = Resolution::new(res_byte)
            .map_err(|_| GraphError::Corrupt(format!("bad resolution byte {res_byte}")))?;

        let meta_len = u32::from_le_bytes(read_array(&mut r)?) as usize;
        if meta_len > 16 << 20 {
            return Err(GraphError::Corrupt(format!("implausible metadata length {meta_len}")));
        }
        let mut meta_bytes = vec![0u8; meta_len];
        r.read_exact(&mut meta_bytes)
            .map_err(|_| GraphError::Corrupt("truncated metadata".into()))?;
        let metadata: BuildMetadata = serde_json::from_slice(&meta_bytes)
            .map_err(|e| GraphError::Corrupt(format!("metadata json: {e}")))?;

        let opt = |v: f64| if v.is_nan() { None } else { Some(v) };
        let node_count = u64::from_le_bytes(read_array(&mut r)?);
        let mut nodes = BTreeMap::new();
        for _ in 0..node_count {
            let cell = CellId::from_u64(u64::from_le_bytes(read_array(&mut r)?))
                .map_err(|e| GraphError::Corrupt(e.to_string()))?;
            let attrs = NodeAttrs {
                median_lon: f64::from_le_bytes(read_array(&mut r)?),
                median_lat: f64::from_le_bytes(read_array(&mut r)?),
                msg_count: u64::from_le_bytes(read_array(&mut r)?),
                distinct_vessels: u64::from_le_bytes(read_array(&mut r)?),
                median_sog: opt(f64::from_le_bytes(read_array(&mut r)?)),
                median_cog: opt(f64::from_le_bytes(read_array(&mut r)?)),
            };
            nodes.insert(cell, attrs);
        }

        let edge_count = u64::from_le_bytes(read_array(&mut r)?);
        let mut edges = BTreeMap::new();
        for _ in 0..edge_count {
            let from = CellId::from_u64(u64::from_le_bytes(read_array(&mut r)?))
                .map_err(|e| GraphError::Corrupt(e.to_string()))?;
            let to = CellId::from_u64(u64::from_le_bytes(read_array(&mut r)?))
                .map_err(|e| GraphError::Corrupt(e.to_string()))?;
            let attrs = EdgeAttrs {
                weight: u64::from_le_bytes(read_array(&mut r)?),
                grid_dist: u32::from_le_bytes(read_array(&mut r)?),
            };
            edges.insert((from, to), attrs);
        }

        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(GraphError::Corrupt("trailing bytes after edge table".into()));
        }

        Self::assemble(resolution, nodes, edges, metadata)
    }

    pub fn load_from_path<P: AsRef<Path>>(path: P) -> Result<Self, GraphError> {
        let file = std::fs::File::open(path)?;
        Self::load(io::BufReader::new(file))
    }

    /// Plain-text export for interoperability and debugging: a node list and
    /// an edge list as CSV.
    pub fn write_csv<W1: Write, W2: Write>(
        &self,
        nodes_out: W1,
        edges_out: W2,
    ) -> csv::Result<()> {
        let mut nw = csv::Writer::from_writer(nodes_out);
        nw.write_record([
            "cell",
            "median_lon",
            "median_lat",
            "msg_count",
            "distinct_vessels",
            "median_sog",
            "median_cog",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for (cell, a) in &self.nodes {
            nw.write_record([
                cell.to_string(),
                a.median_lon.to_string(),
                a.median_lat.to_string(),
                a.msg_count.to_string(),
                a.distinct_vessels.to_string(),
                opt(a.median_sog),
                opt(a.median_cog),
            ])?;
        }
        nw.flush()?;

        let mut ew = csv::Writer::from_writer(edges_out);
        ew.write_record(["from", "to", "weight", "grid_dist"])?;
        for ((from, to), a) in &self.edges {
            ew.write_record([
                from.to_string(),
                to.to_string(),
                a.weight.to_string(),
                a.grid_dist.to_string(),
            ])?;
        }
        ew.flush()?;
        Ok(())
    }

    /// Structural equality ignoring nothing; used by tests and the rebuild
    /// determinism check.
    pub fn structurally_equal(&self, other: &Self) -> bool {
        self.resolution == other.resolution
            && self.nodes == other.nodes
            && self.edges == other.edges
            && self.metadata == other.metadata
    }
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N], GraphError> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|_| GraphError::Corrupt("unexpected end of file".into()))?;
    Ok(buf)
}


#[cfg(test)]
mod weight_spot_checks {
    use std::collections::HashSet;

    use super::*;
    use crate::aggregate::{aggregate_cells, aggregate_transitions, DistinctMode};
    use crate::segment::filter_micro_trips;
    use crate::synth::{corridor_trips, CorridorSpec};

    #[test]
    fn edge_weights_equal_recomputed_trip_counts() {
        let spec = CorridorSpec {
            n_trips: 8,
            trip_duration_min: 60.0,
            ..CorridorSpec::default()
        };
        let r9 = Resolution::new(9).unwrap();
        let trips = filter_micro_trips(corridor_trips(&spec), r9);
        let cells = aggregate_cells(&trips, r9, DistinctMode::Exact).unwrap();
        let (transitions, _) = aggregate_transitions(&trips, r9, DistinctMode::Exact).unwrap();
        let graph = TrafficGraph::build(&cells, &transitions, BuildMetadata::default()).unwrap();

        for (from, to, attrs) in graph.edges().take(25) {
            let mut making_trips: HashSet<&str> = HashSet::new();
            for trip in &trips {
                let mut prev: Option<CellId> = None;
                for p in &trip.points {
                    let cell = CellId::from_point(p, r9).unwrap();
                    if prev == Some(from) && cell == to {
                        making_trips.insert(&trip.trip_id);
                    }
                    prev = Some(cell);
                }
            }
            assert_eq!(
                attrs.weight,
                making_trips.len() as u64,
                "edge {from}->{to} weight disagrees with direct recomputation"
            );
        }
    }
}
