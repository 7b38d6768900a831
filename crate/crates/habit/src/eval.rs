//! Evaluation harness: train/test split, synthetic gap injection, DTW
//! accuracy, navigability statistics, latency and storage measurement.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::{aggregate_cells, aggregate_transitions, DistinctMode};
use crate::cell::{CellError, Resolution};
use crate::geo::{fold_turn_deg, haversine_m, initial_bearing_deg, interpolate, LonLat};
use crate::graph::{BuildMetadata, GraphError, TrafficGraph};
use crate::impute::{impute_gap, impute_sli, Gap, ImputeConfig, ImputeError, ImputedPath};
use crate::model::{GeoPoint, TimedPoint};
use crate::segment::{filter_micro_trips, Trip};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid evaluation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Cell(#[from] CellError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// One imputation method under test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub label: String,
    #[serde(flatten)]
    pub kind: MethodKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MethodKind {
    /// Graph-based imputation at a resolution, with its impute settings.
    Habit {
        resolution: u8,
        #[serde(flatten)]
        impute: ImputeConfig,
    },
    /// Straight-line interpolation baseline.
    Sli,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Fraction of trips used to build the graph.
    pub split_ratio: f64,
    /// Synthetic gap durations to test, minutes.
    pub gap_durations_min: Vec<u64>,
    pub seed: u64,
    /// Densification bound applied to both imputed and truth paths before
    /// DTW, meters.
    pub resample_spacing_m: f64,
    pub methods: Vec<MethodSpec>,
    /// When true (the default) cases run one at a time so per-query latency
    /// is clean; disable to fan out across workers.
    pub sequential_timing: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            split_ratio: 0.7,
            gap_durations_min: vec![60, 120, 240],
            seed: 42,
            resample_spacing_m: 250.0,
            methods: Vec::new(),
            sequential_timing: true,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(EvalError::InvalidConfig(format!(
                "split_ratio must be in (0, 1), got {}",
                self.split_ratio
            )));
        }
        if self.gap_durations_min.is_empty() || self.gap_durations_min.contains(&0) {
            return Err(EvalError::InvalidConfig(
                "gap_durations_min must be non-empty and positive".into(),
            ));
        }
        if self.methods.is_empty() {
            return Err(EvalError::InvalidConfig("no methods configured".into()));
        }
        if self.resample_spacing_m <= 0.0 {
            return Err(EvalError::InvalidConfig("resample_spacing_m must be > 0".into()));
        }
        let mut labels = BTreeSet::new();
        for m in &self.methods {
            if !labels.insert(&m.label) {
                return Err(EvalError::InvalidConfig(format!(
                    "duplicate method label `{}`",
                    m.label
                )));
            }
            if let MethodKind::Habit { resolution, impute } = &m.kind {
                Resolution::new(*resolution)
                    .map_err(|e| EvalError::InvalidConfig(e.to_string()))?;
                impute
                    .validate()
                    .map_err(|e| EvalError::InvalidConfig(format!("method `{}`: {e}", m.label)))?;
            }
        }
        Ok(())
    }
}

/// One synthetic gap cut out of a test trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapCase {
    pub trip_id: String,
    pub duration_min: u64,
    pub gap: Gap,
    /// The true path across the gap: the boundary point on each side plus
    /// every removed point between them, time-ordered.
    pub ground_truth: Vec<TimedPoint>,
}

impl GapCase {
    /// The removed points only (ground truth minus the boundary context).
    pub fn removed(&self) -> &[TimedPoint] {
        &self.ground_truth[1..self.ground_truth.len() - 1]
    }
}

/// Deterministic split of trips into (train, test) by seeded shuffle; the
/// first ceil(ratio * n) shuffled trips train the graph.
pub fn split_trips(trips: &[Trip], ratio: f64, seed: u64) -> (Vec<Trip>, Vec<Trip>) {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..trips.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n_train = ((ratio * trips.len() as f64).ceil() as usize).min(trips.len());
    let train = order[..n_train].iter().map(|&i| trips[i].clone()).collect();
    let test = order[n_train..].iter().map(|&i| trips[i].clone()).collect();
    (train, test)
}

/// Cut a fixed-duration window out of a trip, placed uniformly at random
/// within its time span. Returns `None` (a skip) when the trip is too short
/// or the drawn window contains no points.
pub fn inject_gap(trip: &Trip, duration_min: u64, seed: u64) -> Option<GapCase> {
    let duration_ms = duration_min as i64 * 60_000;
    let t0 = trip.start_ts();
    let tn = trip.end_ts();
    if tn - t0 <= duration_ms {
        return None;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let window_start = rng.gen_range(t0..tn - duration_ms);
    let window_end = window_start + duration_ms;

    let before: Vec<&crate::model::AisRecord> =
        trip.points.iter().filter(|p| p.ts <= window_start).collect();
    let removed: Vec<&crate::model::AisRecord> = trip
        .points
        .iter()
        .filter(|p| p.ts > window_start && p.ts < window_end)
        .collect();
    let after: Vec<&crate::model::AisRecord> =
        trip.points.iter().filter(|p| p.ts >= window_end).collect();
    if removed.is_empty() || before.is_empty() || after.is_empty() {
        return None;
    }

    let as_timed = |r: &crate::model::AisRecord| TimedPoint::new(r.lon, r.lat, r.ts);
    let start = as_timed(before.last().unwrap());
    let end = as_timed(after.first().unwrap());
    let gap = Gap::new(trip.vessel_id.clone(), trip.trip_id.clone(), start, end)
        .expect("strictly ordered by construction");

    let mut ground_truth = Vec::with_capacity(removed.len() + 2);
    ground_truth.push(start);
    ground_truth.extend(removed.iter().map(|r| as_timed(r)));
    ground_truth.push(end);

    Some(GapCase {
        trip_id: trip.trip_id.clone(),
        duration_min,
        gap,
        ground_truth,
    })
}

/// Densify a path so consecutive points are at most `max_spacing_m` apart,
/// inserting great-circle-interpolated points. Originals are retained in
/// order.
pub fn resample_path<P: LonLat>(points: &[P], max_spacing_m: f64) -> Vec<GeoPoint> {
    let mut out = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        if i > 0 {
            let prev = &points[i - 1];
            let d = haversine_m(prev, p);
            if d > max_spacing_m {
                let segments = (d / max_spacing_m).ceil() as usize;
                for k in 1..segments {
                    let (lon, lat) = interpolate(prev, p, k as f64 / segments as f64);
                    out.push(GeoPoint::new(lon, lat));
                }
            }
        }
        out.push(GeoPoint::new(p.lon(), p.lat()));
    }
    out
}

/// Dynamic time warping distance between two point sequences, in meters per
/// alignment step: the classic DTW total cost divided by the warping-path
/// length (shortest path among the minimum-cost ones).
pub fn dtw<A: LonLat, B: LonLat>(a: &[A], b: &[B]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "dtw requires non-empty sequences");

    // (cost, steps), minimized lexicographically; symmetric by construction.
    let mut prev: Vec<(f64, u32)> = vec![(f64::INFINITY, 0); b.len() + 1];
    let mut row: Vec<(f64, u32)> = vec![(f64::INFINITY, 0); b.len() + 1];
    prev[0] = (0.0, 0);

    for i in 1..=a.len() {
        row[0] = (f64::INFINITY, 0);
        for j in 1..=b.len() {
            let d = haversine_m(&a[i - 1], &b[j - 1]);
            let diag = prev[j - 1];
            let up = prev[j];
            let left = row[j - 1];
            let mut best = diag;
            for cand in [up, left] {
                if cand.0 < best.0 || (cand.0 == best.0 && cand.1 < best.1) {
                    best = cand;
                }
            }
            row[j] = (best.0 + d, best.1 + 1);
        }
        std::mem::swap(&mut prev, &mut row);
    }
    let (cost, steps) = prev[b.len()];
    if steps == 0 {
        0.0
    } else {
        cost / steps as f64
    }
}

/// Path shape statistics: point count and rate-of-turn distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurnStats {
    /// Number of positions in the path.
    pub cnt: usize,
    /// Mean absolute turn at interior points, degrees. Absent for paths with
    /// fewer than 3 points.
    pub avg_rot_deg: Option<f64>,
    /// Largest absolute turn, degrees.
    pub max_rot_deg: Option<f64>,
    /// Number of turns exceeding 45 degrees.
    pub turns_gt45: Option<usize>,
}

/// Compute [`TurnStats`]: at each interior point the turn is the absolute
/// change in great-circle bearing between the incoming and outgoing
/// segments, folded to [0, 180].
pub fn turn_stats<P: LonLat>(path: &[P]) -> TurnStats {
    let cnt = path.len();
    if cnt < 3 {
        return TurnStats {
            cnt,
            avg_rot_deg: None,
            max_rot_deg: None,
            turns_gt45: None,
        };
    }

    let mut rotations = Vec::with_capacity(cnt - 2);
    for i in 1..cnt - 1 {
        let (a, b, c) = (&path[i - 1], &path[i], &path[i + 1]);
        // Zero-length segments carry no direction.
        if haversine_m(a, b) < 1e-9 || haversine_m(b, c) < 1e-9 {
            continue;
        }
        let incoming = initial_bearing_deg(a, b);
        let outgoing = initial_bearing_deg(b, c);
        rotations.push(fold_turn_deg(outgoing - incoming));
    }
    if rotations.is_empty() {
        return TurnStats {
            cnt,
            avg_rot_deg: None,
            max_rot_deg: None,
            turns_gt45: None,
        };
    }
    let sum: f64 = rotations.iter().sum();
    let max = rotations.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    TurnStats {
        cnt,
        avg_rot_deg: Some(sum / rotations.len() as f64),
        max_rot_deg: Some(max),
        turns_gt45: Some(rotations.iter().filter(|&&r| r > 45.0).count()),
    }
}

/// One (method, gap case) measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub method: String,
    pub duration_min: u64,
    pub trip_id: String,
    pub dtw_m: f64,
    /// Wall-clock time of the impute call only.
    pub latency_s: f64,
    pub fallback_used: bool,
    pub turn: TurnStats,
}

/// A failed (method, gap case) pair; failures never abort the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseFailure {
    pub method: String,
    pub duration_min: u64,
    pub trip_id: String,
    pub error: String,
}

/// Per-(method, duration) aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub duration_min: u64,
    pub cases: usize,
    pub failures: usize,
    pub fallbacks: usize,
    pub mean_dtw_m: f64,
    pub median_dtw_m: f64,
    pub avg_latency_s: f64,
    pub max_latency_s: f64,
    pub avg_cnt: f64,
    pub avg_rot_deg: Option<f64>,
    pub avg_max_rot_deg: Option<f64>,
    pub avg_turns_gt45: Option<f64>,
}

/// Graph built for one resolution during the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphInfo {
    pub resolution: u8,
    pub nodes: usize,
    pub edges: usize,
    pub storage_bytes: u64,
    pub build_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seed: u64,
    pub train_trips: usize,
    pub test_trips: usize,
    /// Test trips too short for a duration (or drawing an empty window),
    /// keyed by gap duration in minutes.
    pub skipped_cases: BTreeMap<u64, usize>,
    pub graphs: Vec<GraphInfo>,
    /// Turn statistics of the ground-truth paths, per duration, averaged
    /// over cases; the reference row for the simplification table.
    pub original_turns: BTreeMap<u64, TurnAverages>,
    pub summaries: Vec<MethodSummary>,
    pub cases: Vec<CaseResult>,
    pub case_failures: Vec<CaseFailure>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurnAverages {
    pub avg_cnt: f64,
    pub avg_rot_deg: Option<f64>,
    pub avg_max_rot_deg: Option<f64>,
    pub avg_turns_gt45: Option<f64>,
}

impl EvalReport {
    /// The report with timing fields zeroed: what a seeded re-run must
    /// reproduce bit-for-bit.
    pub fn deterministic_view(&self) -> EvalReport {
        let mut view = self.clone();
        for c in &mut view.cases {
            c.latency_s = 0.0;
        }
        for s in &mut view.summaries {
            s.avg_latency_s = 0.0;
            s.max_latency_s = 0.0;
        }
        for g in &mut view.graphs {
            g.build_seconds = 0.0;
        }
        view
    }

    pub fn summary_for(&self, method: &str, duration_min: u64) -> Option<&MethodSummary> {
        self.summaries
            .iter()
            .find(|s| s.method == method && s.duration_min == duration_min)
    }
}

fn derive_seed(master: u64, duration_min: u64, trip_id: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in master
        .to_le_bytes()
        .into_iter()
        .chain(duration_min.to_le_bytes())
        .chain(trip_id.bytes())
    {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn median_of(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let collected: Vec<f64> = values.collect();
    if collected.is_empty() {
        None
    } else {
        Some(collected.iter().sum::<f64>() / collected.len() as f64)
    }
}

/// Run the full protocol: split, build graphs on the train side, inject gaps
/// into test trips, impute each case per method, and score with DTW and turn
/// statistics. Deterministic given the seed (latency and build times
/// excepted).
pub fn run_benchmark(cfg: &EvalConfig, trips: &[Trip]) -> Result<EvalReport, EvalError> {
    cfg.validate()?;
    if trips.len() < 2 {
        return Err(EvalError::InvalidConfig("need at least 2 trips".into()));
    }

    let (train, test) = split_trips(trips, cfg.split_ratio, cfg.seed);

    // One graph per distinct resolution among the configured methods.
    let resolutions: BTreeSet<u8> = cfg
        .methods
        .iter()
        .filter_map(|m| match &m.kind {
            MethodKind::Habit { resolution, .. } => Some(*resolution),
            MethodKind::Sli => None,
        })
        .collect();

    let mut graphs: BTreeMap<u8, TrafficGraph> = BTreeMap::new();
    let mut graph_infos = Vec::new();
    for &r in &resolutions {
        let resolution = Resolution::new(r).expect("validated");
        let started = Instant::now();
        let train_filtered = filter_micro_trips(train.clone(), resolution);
        let cells = aggregate_cells(&train_filtered, resolution, DistinctMode::Exact)?;
        let (transitions, _) = aggregate_transitions(&train_filtered, resolution, DistinctMode::Exact)?;
        let record_count: u64 = train_filtered.iter().map(|t| t.points.len() as u64).sum();
        let graph = TrafficGraph::build(
            &cells,
            &transitions,
            BuildMetadata {
                source: format!("eval train split (seed {})", cfg.seed),
                trip_count: train_filtered.len() as u64,
                record_count,
                built_at_ms: 0,
            },
        )?;
        let build_seconds = started.elapsed().as_secs_f64();
        let mut bytes = Vec::new();
        graph.save(&mut bytes)?;
        graph_infos.push(GraphInfo {
            resolution: r,
            nodes: graph.node_count(),
            edges: graph.edge_count(),
            storage_bytes: bytes.len() as u64,
            build_seconds,
        });
        graphs.insert(r, graph);
    }

    // Gap cases, one per (test trip, duration), with deterministic seeds.
    let mut skipped: BTreeMap<u64, usize> = BTreeMap::new();
    let mut cases: Vec<GapCase> = Vec::new();
    for &duration in &cfg.gap_durations_min {
        skipped.entry(duration).or_insert(0);
        for trip in &test {
            match inject_gap(trip, duration, derive_seed(cfg.seed, duration, &trip.trip_id)) {
                Some(case) => cases.push(case),
                None => *skipped.get_mut(&duration).unwrap() += 1,
            }
        }
    }

    let mut original_turns = BTreeMap::new();
    for &duration in &cfg.gap_durations_min {
        let stats: Vec<TurnStats> = cases
            .iter()
            .filter(|c| c.duration_min == duration)
            .map(|c| turn_stats(&c.ground_truth))
            .collect();
        if !stats.is_empty() {
            original_turns.insert(duration, average_turns(&stats));
        }
    }

    // Score every (method, case) pair.
    let mut results: Vec<CaseResult> = Vec::new();
    let mut failures: Vec<CaseFailure> = Vec::new();
    let run_case = |method: &MethodSpec, case: &GapCase| -> Result<CaseResult, CaseFailure> {
        let started = Instant::now();
        let imputed: Result<ImputedPath, ImputeError> = match &method.kind {
            MethodKind::Habit { resolution, impute } => {
                let graph = &graphs[resolution];
                impute_gap(graph, &case.gap, impute)
            }
            MethodKind::Sli => Ok(impute_sli(&case.gap, cfg.resample_spacing_m)),
        };
        let latency_s = started.elapsed().as_secs_f64();
        match imputed {
            Ok(path) => {
                let imputed_dense = resample_path(&path.points, cfg.resample_spacing_m);
                let truth_dense = resample_path(&case.ground_truth, cfg.resample_spacing_m);
                Ok(CaseResult {
                    method: method.label.clone(),
                    duration_min: case.duration_min,
                    trip_id: case.trip_id.clone(),
                    dtw_m: dtw(&imputed_dense, &truth_dense),
                    latency_s,
                    fallback_used: path.fallback_used,
                    turn: turn_stats(&path.points),
                })
            }
            Err(e) => Err(CaseFailure {
                method: method.label.clone(),
                duration_min: case.duration_min,
                trip_id: case.trip_id.clone(),
                error: e.to_string(),
            }),
        }
    };

    if cfg.sequential_timing {
        for method in &cfg.methods {
            for case in &cases {
                match run_case(method, case) {
                    Ok(r) => results.push(r),
                    Err(f) => failures.push(f),
                }
            }
        }
    } else {
        use rayon::prelude::*;
        let pairs: Vec<(usize, usize)> = (0..cfg.methods.len())
            .flat_map(|m| (0..cases.len()).map(move |c| (m, c)))
            .collect();
        let outcomes: Vec<Result<CaseResult, CaseFailure>> = pairs
            .par_iter()
            .map(|&(m, c)| run_case(&cfg.methods[m], &cases[c]))
            .collect();
        for outcome in outcomes {
            match outcome {
                Ok(r) => results.push(r),
                Err(f) => failures.push(f),
            }
        }
    }
    results.sort_by(|a, b| {
        (&a.method, a.duration_min, &a.trip_id).cmp(&(&b.method, b.duration_min, &b.trip_id))
    });
    failures.sort_by(|a, b| {
        (&a.method, a.duration_min, &a.trip_id).cmp(&(&b.method, b.duration_min, &b.trip_id))
    });

    // Aggregate.
    let mut summaries = Vec::new();
    for method in &cfg.methods {
        for &duration in &cfg.gap_durations_min {
            let group: Vec<&CaseResult> = results
                .iter()
                .filter(|r| r.method == method.label && r.duration_min == duration)
                .collect();
            let n_failures = failures
                .iter()
                .filter(|f| f.method == method.label && f.duration_min == duration)
                .count();
            if group.is_empty() && n_failures == 0 {
                continue;
            }
            let dtws: Vec<f64> = group.iter().map(|r| r.dtw_m).collect();
            let turns: Vec<TurnStats> = group.iter().map(|r| r.turn).collect();
            let avg = average_turns(&turns);
            summaries.push(MethodSummary {
                method: method.label.clone(),
                duration_min: duration,
                cases: group.len(),
                failures: n_failures,
                fallbacks: group.iter().filter(|r| r.fallback_used).count(),
                mean_dtw_m: mean_of(dtws.iter().copied()).unwrap_or(0.0),
                median_dtw_m: median_of(dtws),
                avg_latency_s: mean_of(group.iter().map(|r| r.latency_s)).unwrap_or(0.0),
                max_latency_s: group.iter().map(|r| r.latency_s).fold(0.0, f64::max),
                avg_cnt: avg.avg_cnt,
                avg_rot_deg: avg.avg_rot_deg,
                avg_max_rot_deg: avg.avg_max_rot_deg,
                avg_turns_gt45: avg.avg_turns_gt45,
            });
        }
    }

    Ok(EvalReport {
        seed: cfg.seed,
        train_trips: train.len(),
        test_trips: test.len(),
        skipped_cases: skipped,
        graphs: graph_infos,
        original_turns,
        summaries,
        cases: results,
        case_failures: failures,
    })
}

fn average_turns(stats: &[TurnStats]) -> TurnAverages {
    TurnAverages {
        avg_cnt: mean_of(stats.iter().map(|s| s.cnt as f64)).unwrap_or(0.0),
        avg_rot_deg: mean_of(stats.iter().filter_map(|s| s.avg_rot_deg)),
        avg_max_rot_deg: mean_of(stats.iter().filter_map(|s| s.max_rot_deg)),
        avg_turns_gt45: mean_of(stats.iter().filter_map(|s| s.turns_gt45.map(|n| n as f64))),
    }
}


/// Aligned-column text rendering of a report, for humans.
pub fn render_report_text(report: &EvalReport) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "seed {}   train {}   test {}",
        report.seed, report.train_trips, report.test_trips
    );
    for (duration, skips) in &report.skipped_cases {
        if *skips > 0 {
            let _ = writeln!(out, "skipped {skips} trips too short for {duration}-min gaps");
        }
    }
    if !report.graphs.is_empty() {
        let _ = writeln!(out, "\n{:>4} {:>9} {:>9} {:>12} {:>9}", "r", "nodes", "edges", "bytes", "build_s");
        for g in &report.graphs {
            let _ = writeln!(
                out,
                "{:>4} {:>9} {:>9} {:>12} {:>9.3}",
                g.resolution, g.nodes, g.edges, g.storage_bytes, g.build_seconds
            );
        }
    }
    let _ = writeln!(
        out,
        "\n{:<24} {:>5} {:>6} {:>10} {:>10} {:>9} {:>9} {:>8} {:>8} {:>8} {:>6}",
        "method", "gap_m", "cases", "mean_dtw", "med_dtw", "avg_lat_s", "max_lat_s", "cnt", "avg_rot", "max_rot", ">45"
    );
    let opt = |v: Option<f64>| v.map(|x| format!("{x:8.2}")).unwrap_or_else(|| format!("{:>8}", "-"));
    for s in &report.summaries {
        let _ = writeln!(
            out,
            "{:<24} {:>5} {:>6} {:>10.1} {:>10.1} {:>9.4} {:>9.4} {:>8.2} {} {} {:>6}",
            s.method,
            s.duration_min,
            s.cases,
            s.mean_dtw_m,
            s.median_dtw_m,
            s.avg_latency_s,
            s.max_latency_s,
            s.avg_cnt,
            opt(s.avg_rot_deg),
            opt(s.avg_max_rot_deg),
            s.avg_turns_gt45.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".into()),
        );
    }
    for (duration, t) in &report.original_turns {
        let _ = writeln!(
            out,
            "{:<24} {:>5} {:>6} {:>10} {:>10} {:>9} {:>9} {:>8.2} {} {} {:>6}",
            "original",
            duration,
            "-",
            "-",
            "-",
            "-",
            "-",
            t.avg_cnt,
            opt(t.avg_rot_deg),
            opt(t.avg_max_rot_deg),
            t.avg_turns_gt45.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".into()),
        );
    }
    if !report.case_failures.is_empty() {
        let _ = writeln!(out, "\n{} case failures:", report.case_failures.len());
        for f in &report.case_failures {
            let _ = writeln!(out, "  {} {}min {}: {}", f.method, f.duration_min, f.trip_id, f.error);
        }
    }
    out
}

/// Per-case CSV for downstream plotting.
pub fn write_cases_csv<W: std::io::Write>(writer: W, report: &EvalReport) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "trip_id",
        "method",
        "duration_min",
        "dtw_m",
        "latency_s",
        "fallback_used",
        "cnt",
        "avg_rot_deg",
        "max_rot_deg",
        "turns_gt45",
    ])?;
    let opt_f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for c in &report.cases {
        w.write_record([
            c.trip_id.clone(),
            c.method.clone(),
            c.duration_min.to_string(),
            c.dtw_m.to_string(),
            c.latency_s.to_string(),
            c.fallback_used.to_string(),
            c.turn.cnt.to_string(),
            opt_f(c.turn.avg_rot_deg),
            opt_f(c.turn.max_rot_deg),
            c.turn.turns_gt45.map(|n| n.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
