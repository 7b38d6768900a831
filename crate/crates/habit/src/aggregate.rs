//! Projection of trips onto the hexagonal grid and the per-cell /
//! per-transition statistics the traffic graph is built from.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::cell::{CellError, CellId, Resolution};
use crate::geo::LonLat;
use crate::segment::Trip;
use crate::sketch::HyperLogLog;

/// How distinct counts (vessels per cell, trips per transition) are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistinctMode {
    /// Exact counting with hash sets. The default.
    #[default]
    Exact,
    /// HyperLogLog sketches; bounded memory for very large corpora at the
    /// cost of a few-percent counting error.
    Approximate,
}

/// Aggregated statistics for one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub cell: CellId,
    pub msg_count: u64,
    pub distinct_vessels: u64,
    pub median_lon: f64,
    pub median_lat: f64,
    pub median_sog: Option<f64>,
    pub median_cog: Option<f64>,
}

/// Aggregated statistics for one directed cell transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionStats {
    pub from: CellId,
    pub to: CellId,
    /// Number of distinct trips that made this transition.
    pub trip_count: u64,
    /// Grid distance between the two cells, in cells.
    pub grid_dist: u32,
}

/// Cell containing the coordinate at the given resolution.
pub fn assign_cell(lat: f64, lon: f64, resolution: Resolution) -> Result<CellId, CellError> {
    CellId::from_point(&(lon, lat), resolution)
}

/// Median with midpoint interpolation on even counts. Sorts its input.
fn median_interpolated(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

/// Circular median of angles in degrees: the observed angle minimizing the
/// summed circular distance to all observations, ties broken by the smallest
/// angle. O(n log n) via prefix sums over the sorted angles.
fn circular_median_deg(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut angles: Vec<f64> = values.iter().map(|v| v.rem_euclid(360.0)).collect();
    angles.sort_unstable_by(f64::total_cmp);
    let n = angles.len();
    let prefix: Vec<f64> = std::iter::once(0.0)
        .chain(angles.iter().scan(0.0, |acc, &v| {
            *acc += v;
            Some(*acc)
        }))
        .collect();
    // Sum of a[j] for j in [lo, hi).
    let range_sum = |lo: usize, hi: usize| prefix[hi] - prefix[lo];
    let lower_bound = |x: f64| angles.partition_point(|&v| v < x);

    let mut best: Option<(f64, f64)> = None;
    for (i, &theta) in angles.iter().enumerate() {
        // Angles within a half-turn on either side contribute |phi - theta|;
        // the far arc contributes 360 - |phi - theta|.
        let lo = lower_bound(theta - 180.0);
        let hi = lower_bound(theta + 180.0);
        let below = theta * (i - lo) as f64 - range_sum(lo, i);
        let above = range_sum(i, hi) - theta * (hi - i) as f64;
        let wrap_low = range_sum(0, lo) + (360.0 - theta) * lo as f64;
        let wrap_high = (360.0 + theta) * (n - hi) as f64 - range_sum(hi, n);
        let cost = below + above + wrap_low + wrap_high;
        match best {
            Some((best_cost, _)) if cost >= best_cost => {}
            _ => best = Some((cost, theta)),
        }
    }
    best.map(|(_, theta)| theta)
}

enum DistinctCounter {
    Exact(HashSet<String>),
    Approximate(HyperLogLog),
}

impl DistinctCounter {
    fn new(mode: DistinctMode) -> Self {
        match mode {
            DistinctMode::Exact => Self::Exact(HashSet::new()),
            DistinctMode::Approximate => Self::Approximate(HyperLogLog::new()),
        }
    }

    fn insert(&mut self, key: &str) {
        match self {
            Self::Exact(set) => {
                if !set.contains(key) {
                    set.insert(key.to_string());
                }
            }
            Self::Approximate(hll) => hll.insert(key.as_bytes()),
        }
    }

    fn count(&self) -> u64 {
        match self {
            Self::Exact(set) => set.len() as u64,
            Self::Approximate(hll) => hll.count(),
        }
    }
}

#[derive(Default)]
struct CellAccumulator {
    msg_count: u64,
    lons: Vec<f64>,
    lats: Vec<f64>,
    sogs: Vec<f64>,
    cogs: Vec<f64>,
    vessels: Option<DistinctCounter>,
}

/// Compute per-cell statistics over all trip points at the given resolution.
pub fn aggregate_cells(
    trips: &[Trip],
    resolution: Resolution,
    mode: DistinctMode,
) -> Result<BTreeMap<CellId, CellStats>, CellError> {
    let mut acc: BTreeMap<CellId, CellAccumulator> = BTreeMap::new();

    for trip in trips {
        for p in &trip.points {
            let cell = CellId::from_point(p, resolution)?;
            let entry = acc.entry(cell).or_default();
            entry.msg_count += 1;
            entry.lons.push(p.lon());
            entry.lats.push(p.lat());
            if let Some(sog) = p.sog {
                entry.sogs.push(sog);
            }
            if let Some(cog) = p.cog {
                entry.cogs.push(cog);
            }
            entry
                .vessels
                .get_or_insert_with(|| DistinctCounter::new(mode))
                .insert(&p.vessel_id);
        }
    }

    Ok(acc
        .into_iter()
        .map(|(cell, mut a)| {
            let stats = CellStats {
                cell,
                msg_count: a.msg_count,
                distinct_vessels: a.vessels.map(|v| v.count()).unwrap_or(0),
                median_lon: median_interpolated(&mut a.lons).unwrap_or_default(),
                median_lat: median_interpolated(&mut a.lats).unwrap_or_default(),
                median_sog: median_interpolated(&mut a.sogs),
                median_cog: circular_median_deg(&a.cogs),
            };
            (cell, stats)
        })
        .collect())
}

/// Directed transition statistics keyed by (lagged cell, cell).
pub type TransitionMap = BTreeMap<(CellId, CellId), TransitionStats>;

/// Compute per-transition statistics: for each trip, consecutive points'
/// cells form lagged pairs; self-pairs are skipped; a trip contributes at
/// most once to each directed pair it makes.
///
/// Returns the transition map and the number of pairs dropped because the
/// grid distance is undefined (pentagon distortion on extreme jumps).
pub fn aggregate_transitions(
    trips: &[Trip],
    resolution: Resolution,
    mode: DistinctMode,
) -> Result<(TransitionMap, u64), CellError> {
    struct TransitionAcc {
        grid_dist: u32,
        trips: DistinctCounter,
    }

    let mut acc: BTreeMap<(CellId, CellId), TransitionAcc> = BTreeMap::new();
    let mut undefined_pairs = 0u64;

    for trip in trips {
        let mut prev: Option<CellId> = None;
        for p in &trip.points {
            let cell = CellId::from_point(p, resolution)?;
            if let Some(lag) = prev {
                if lag != cell {
                    match acc.entry((lag, cell)) {
                        std::collections::btree_map::Entry::Occupied(mut e) => {
                            e.get_mut().trips.insert(&trip.trip_id);
                        }
                        std::collections::btree_map::Entry::Vacant(e) => {
                            match lag.grid_distance(cell) {
                                Ok(grid_dist) => {
                                    let mut trips_counter = DistinctCounter::new(mode);
                                    trips_counter.insert(&trip.trip_id);
                                    e.insert(TransitionAcc {
                                        grid_dist,
                                        trips: trips_counter,
                                    });
                                }
                                Err(_) => undefined_pairs += 1,
                            }
                        }
                    }
                }
            }
            prev = Some(cell);
        }
    }

    let map = acc
        .into_iter()
        .map(|((from, to), a)| {
            let stats = TransitionStats {
                from,
                to,
                trip_count: a.trips.count(),
                grid_dist: a.grid_dist,
            };
            ((from, to), stats)
        })
        .collect();
    Ok((map, undefined_pairs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AisRecord;

    fn trip_with_points(trip_id: &str, vessel: &str, coords: &[(f64, f64)]) -> Trip {
        let points = coords
            .iter()
            .enumerate()
            .map(|(i, &(lon, lat))| AisRecord {
                vessel_id: vessel.into(),
                ts: 1_704_448_800_000 + i as i64 * 60_000,
                lon,
                lat,
                sog: Some(10.0),
                cog: Some(45.0),
            })
            .collect();
        Trip {
            trip_id: trip_id.into(),
            vessel_id: vessel.into(),
            points,
        }
    }

    fn r9() -> Resolution {
        Resolution::new(9).unwrap()
    }

    // Coordinates guaranteed to sit inside one r9 cell.
    fn cell_center() -> (f64, f64) {
        let cell = assign_cell(55.0, 12.0, Resolution::new(9).unwrap()).unwrap();
        let c = cell.center();
        (c.lon, c.lat)
    }

    #[test]
    fn single_trip_single_cell_counts() {
        let c = cell_center();
        let trip = trip_with_points("t1", "V1", &[c; 5]);
        let cells = aggregate_cells(&[trip], r9(), DistinctMode::Exact).unwrap();
        assert_eq!(cells.len(), 1);
        let stats = cells.values().next().unwrap();
        assert_eq!(stats.msg_count, 5);
        assert_eq!(stats.distinct_vessels, 1);
    }

    #[test]
    fn median_is_robust_to_outliers() {
        let mut values = vec![1.0, 2.0, 10.0];
        assert_eq!(median_interpolated(&mut values), Some(2.0));
        let mut even = vec![1.0, 2.0, 3.0, 10.0];
        assert_eq!(median_interpolated(&mut even), Some(2.5));
    }

    #[test]
    fn circular_median_handles_north_wraparound() {
        // Courses around due north: 350, 10, 30. Plain median of the numbers
        // would say 30; circularly the middle course is 10.
        assert_eq!(circular_median_deg(&[350.0, 10.0, 30.0]), Some(10.0));
        assert_eq!(circular_median_deg(&[0.0]), Some(0.0));
        assert_eq!(circular_median_deg(&[]), None);
        // Ties break to the smallest angle.
        assert_eq!(circular_median_deg(&[90.0, 270.0]), Some(90.0));
    }

    #[test]
    fn circular_median_matches_brute_force() {
        let mut state = 0x1234_5678_u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64 / (1u64 << 31) as f64) * 360.0
        };
        for _ in 0..50 {
            let n = 1 + (next() as usize % 40);
            let values: Vec<f64> = (0..n).map(|_| next()).collect();
            let fast = circular_median_deg(&values).unwrap();
            // Brute force over candidates.
            let dist = |a: f64, b: f64| {
                let d = (a - b).abs() % 360.0;
                d.min(360.0 - d)
            };
            let mut best = (f64::INFINITY, f64::INFINITY);
            let mut sorted = values.clone();
            sorted.sort_unstable_by(f64::total_cmp);
            for &cand in &sorted {
                let cost: f64 = values.iter().map(|&v| dist(cand, v)).sum();
                if cost < best.0 - 1e-9 {
                    best = (cost, cand);
                }
            }
            assert!(
                (fast - best.1).abs() < 1e-9,
                "fast {fast} brute {} on {values:?}",
                best.1
            );
        }
    }

    #[test]
    fn two_vessels_same_cell() {
        let (lon, lat) = cell_center();
        let t1 = trip_with_points("t1", "V1", &[(lon, lat); 3]);
        let t2 = trip_with_points("t2", "V2", &[(lon, lat); 3]);
        let cells = aggregate_cells(&[t1, t2], r9(), DistinctMode::Exact).unwrap();
        let stats = cells.values().next().unwrap();
        assert_eq!(stats.msg_count, 6);
        assert_eq!(stats.distinct_vessels, 2);
    }

    #[test]
    fn median_position_inside_bounding_box() {
        let (lon, lat) = cell_center();
        let coords = [
            (lon - 1e-4, lat - 5e-5),
            (lon, lat),
            (lon + 2e-4, lat + 1e-4),
        ];
        let trip = trip_with_points("t1", "V1", &coords);
        let cells = aggregate_cells(&[trip], r9(), DistinctMode::Exact).unwrap();
        let stats = cells.values().next().unwrap();
        let lons: Vec<f64> = coords.iter().map(|c| c.0).collect();
        let lats: Vec<f64> = coords.iter().map(|c| c.1).collect();
        assert!(stats.median_lon >= lons.iter().cloned().fold(f64::INFINITY, f64::min));
        assert!(stats.median_lon <= lons.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        assert!(stats.median_lat >= lats.iter().cloned().fold(f64::INFINITY, f64::min));
        assert!(stats.median_lat <= lats.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    }

    #[test]
    fn self_transitions_skipped() {
        let (lon, lat) = cell_center();
        let cell = assign_cell(lat, lon, r9()).unwrap();
        let other = cell.ring(1)[0].center();
        let trip = trip_with_points("t1", "V1", &[(lon, lat), (lon, lat), (other.lon, other.lat)]);
        let (transitions, dropped) =
            aggregate_transitions(&[trip], r9(), DistinctMode::Exact).unwrap();
        assert_eq!(dropped, 0);
        assert_eq!(transitions.len(), 1);
        let t = transitions.values().next().unwrap();
        assert_eq!(t.trip_count, 1);
        assert_eq!(t.grid_dist, 1);
    }

    #[test]
    fn transition_counts_distinct_trips() {
        let (lon, lat) = cell_center();
        let cell = assign_cell(lat, lon, r9()).unwrap();
        let other = cell.ring(1)[0].center();
        let t1 = trip_with_points("t1", "V1", &[(lon, lat), (other.lon, other.lat)]);
        let t2 = trip_with_points("t2", "V2", &[(lon, lat), (other.lon, other.lat)]);
        let (transitions, _) =
            aggregate_transitions(&[t1, t2], r9(), DistinctMode::Exact).unwrap();
        assert_eq!(transitions.values().next().unwrap().trip_count, 2);
    }

    #[test]
    fn oscillating_trip_counts_once_per_direction() {
        let (lon, lat) = cell_center();
        let cell = assign_cell(lat, lon, r9()).unwrap();
        let b = cell.ring(1)[0].center();
        let coords = [(lon, lat), (b.lon, b.lat), (lon, lat), (b.lon, b.lat)];
        let trip = trip_with_points("t1", "V1", &coords);
        let (transitions, _) =
            aggregate_transitions(&[trip], r9(), DistinctMode::Exact).unwrap();
        assert_eq!(transitions.len(), 2);
        for t in transitions.values() {
            assert_eq!(t.trip_count, 1);
        }
    }

    #[test]
    fn sparse_jump_records_grid_distance() {
        let cell = assign_cell(55.0, 12.0, r9()).unwrap();
        let far = *cell.ring(3).first().unwrap();
        let a = cell.center();
        let b = far.center();
        let trip = trip_with_points("t1", "V1", &[(a.lon, a.lat), (b.lon, b.lat)]);
        let (transitions, _) =
            aggregate_transitions(&[trip], r9(), DistinctMode::Exact).unwrap();
        assert_eq!(transitions[&(cell, far)].grid_dist, 3);
    }

    #[test]
    fn msg_counts_sum_to_total_points() {
        let (lon, lat) = cell_center();
        let t1 = trip_with_points("t1", "V1", &[(lon, lat), (lon + 0.01, lat), (lon + 0.02, lat)]);
        let t2 = trip_with_points("t2", "V2", &[(lon, lat + 0.01), (lon, lat + 0.02)]);
        let total: u64 = (t1.points.len() + t2.points.len()) as u64;
        let cells = aggregate_cells(&[t1, t2], r9(), DistinctMode::Exact).unwrap();
        let sum: u64 = cells.values().map(|s| s.msg_count).sum();
        assert_eq!(sum, total);
    }

    #[test]
    fn aggregation_is_order_independent() {
        let (lon, lat) = cell_center();
        let t1 = trip_with_points("t1", "V1", &[(lon, lat), (lon + 0.01, lat), (lon + 0.02, lat)]);
        let t2 = trip_with_points("t2", "V2", &[(lon, lat + 0.01), (lon + 0.015, lat)]);
        let forward = aggregate_cells(&[t1.clone(), t2.clone()], r9(), DistinctMode::Exact).unwrap();
        let backward = aggregate_cells(&[t2.clone(), t1.clone()], r9(), DistinctMode::Exact).unwrap();
        assert_eq!(forward, backward);
        let (ft, _) = aggregate_transitions(&[t1.clone(), t2.clone()], r9(), DistinctMode::Exact).unwrap();
        let (bt, _) = aggregate_transitions(&[t2, t1], r9(), DistinctMode::Exact).unwrap();
        assert_eq!(ft, bt);
    }

    #[test]
    fn transition_endpoints_always_have_cell_stats() {
        let (lon, lat) = cell_center();
        let trip = trip_with_points(
            "t1",
            "V1",
            &[(lon, lat), (lon + 0.005, lat), (lon + 0.01, lat), (lon + 0.02, lat)],
        );
        let cells = aggregate_cells(std::slice::from_ref(&trip), r9(), DistinctMode::Exact).unwrap();
        let (transitions, _) =
            aggregate_transitions(std::slice::from_ref(&trip), r9(), DistinctMode::Exact).unwrap();
        for (from, to) in transitions.keys() {
            assert!(cells.contains_key(from));
            assert!(cells.contains_key(to));
        }
    }

    #[test]
    fn approximate_mode_close_to_exact_on_small_sets() {
        let (lon, lat) = cell_center();
        let trips: Vec<Trip> = (0..50)
            .map(|i| trip_with_points(&format!("t{i}"), &format!("V{i}"), &[(lon, lat); 2]))
            .collect();
        let exact = aggregate_cells(&trips, r9(), DistinctMode::Exact).unwrap();
        let approx = aggregate_cells(&trips, r9(), DistinctMode::Approximate).unwrap();
        let e = exact.values().next().unwrap().distinct_vessels as f64;
        let a = approx.values().next().unwrap().distinct_vessels as f64;
        assert!((a - e).abs() / e <= 0.05, "exact {e} approx {a}");
    }
}
