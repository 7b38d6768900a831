//! Per-vessel stream cleaning and segmentation into trips.
//!
//! A trip is the subsequence of accepted positions between two successive
//! stops or communication gaps. Stops end the current trip at their first
//! record and start the next one at their last record; interior stop records
//! belong to no trip. A silence of at least the gap threshold also cuts.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::cell::{CellId, Resolution};
use crate::geo::{haversine_m, mps_to_knots};
use crate::model::{
    format_timestamp, AisRecord, RejectReason, TimestampMs,
};

/// Thresholds controlling cleaning and segmentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmenterConfig {
    /// Below this speed a vessel counts as stationary.
    pub stop_speed_knots: f64,
    /// Minimum stationary duration for a stop, seconds.
    pub min_stop_duration_s: u64,
    /// Silence of at least this long ends the current trip, seconds.
    pub gap_threshold_s: u64,
    /// Implied point-to-point speeds above this are rejected as noise.
    pub max_plausible_speed_knots: f64,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self {
            stop_speed_knots: 0.5,
            min_stop_duration_s: 900,
            gap_threshold_s: 1800,
            max_plausible_speed_knots: 50.0,
        }
    }
}

impl SegmenterConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.stop_speed_knots <= 0.0 {
            return Err("stop_speed_knots must be > 0".into());
        }
        if self.min_stop_duration_s == 0 {
            return Err("min_stop_duration_s must be > 0".into());
        }
        if self.gap_threshold_s == 0 {
            return Err("gap_threshold_s must be > 0".into());
        }
        if self.max_plausible_speed_knots <= 0.0 {
            return Err("max_plausible_speed_knots must be > 0".into());
        }
        Ok(())
    }
}

/// A cleaned, time-ordered run of positions for one vessel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trip {
    pub trip_id: String,
    pub vessel_id: String,
    pub points: Vec<AisRecord>,
}

impl Trip {
    pub fn start_ts(&self) -> TimestampMs {
        self.points.first().map(|p| p.ts).unwrap_or(0)
    }

    pub fn end_ts(&self) -> TimestampMs {
        self.points.last().map(|p| p.ts).unwrap_or(0)
    }

    pub fn duration_ms(&self) -> i64 {
        self.end_ts() - self.start_ts()
    }

    /// Check the structural trip invariants; used by tests and loaders.
    pub fn check_invariants(&self, cfg: &SegmenterConfig) -> Result<(), String> {
        if self.points.len() < 3 {
            return Err(format!("trip {} has {} points (< 3)", self.trip_id, self.points.len()));
        }
        let gap_ms = cfg.gap_threshold_s as i64 * 1000;
        for w in self.points.windows(2) {
            if w[1].ts <= w[0].ts {
                return Err(format!("trip {} timestamps not strictly increasing", self.trip_id));
            }
            if w[1].ts - w[0].ts >= gap_ms {
                return Err(format!("trip {} contains a gap >= threshold", self.trip_id));
            }
        }
        let stops = detect_stops(&self.points, cfg);
        // Boundary-touching stops are cut points, not interior stops.
        for (s, e) in stops {
            if s > 0 && e < self.points.len() - 1 {
                return Err(format!("trip {} contains an interior stop", self.trip_id));
            }
        }
        Ok(())
    }
}

/// Deterministic trip identifier from vessel id and first accepted timestamp.
pub fn trip_id_for(vessel_id: &str, first_ts: TimestampMs) -> String {
    // FNV-1a, 64-bit; stable across runs and platforms.
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = OFFSET;
    for b in vessel_id.bytes().chain([0xff]).chain(first_ts.to_le_bytes()) {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(PRIME);
    }
    format!("{hash:016x}")
}

/// A record dropped during cleaning, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedRecord {
    pub record: AisRecord,
    pub reason: RejectReason,
}

/// Drop duplicates, delayed messages, and kinematically impossible jumps from
/// a single vessel's time-sorted stream.
///
/// Returns the accepted records (strictly increasing timestamps) and the
/// rejected ones. Rejections are data, not failures.
pub fn clean_stream(
    records: Vec<AisRecord>,
    cfg: &SegmenterConfig,
) -> (Vec<AisRecord>, Vec<RejectedRecord>) {
    let mut accepted: Vec<AisRecord> = Vec::with_capacity(records.len());
    let mut rejected = Vec::new();

    for rec in records {
        let reason = match accepted.last() {
            Some(last) if rec.ts == last.ts && rec.vessel_id == last.vessel_id => {
                Some(RejectReason::DuplicateRecord)
            }
            Some(last) if rec.ts <= last.ts => Some(RejectReason::OutOfOrder),
            Some(last) => {
                let dt_s = (rec.ts - last.ts) as f64 / 1000.0;
                let speed_kn = mps_to_knots(haversine_m(last, &rec) / dt_s);
                (speed_kn > cfg.max_plausible_speed_knots)
                    .then_some(RejectReason::KinematicOutlier)
            }
            None => None,
        };
        match reason {
            Some(reason) => rejected.push(RejectedRecord { record: rec, reason }),
            None => accepted.push(rec),
        }
    }
    (accepted, rejected)
}

/// Speed in knots attributed to `records[i]` for stop detection: reported
/// SOG when present, otherwise the speed implied by the adjacent position.
fn speed_at(records: &[AisRecord], i: usize) -> f64 {
    if let Some(sog) = records[i].sog {
        return sog;
    }
    let (a, b) = if i == 0 {
        if records.len() < 2 {
            return 0.0;
        }
        (0, 1)
    } else {
        (i - 1, i)
    };
    let dt_s = (records[b].ts - records[a].ts) as f64 / 1000.0;
    if dt_s <= 0.0 {
        return 0.0;
    }
    mps_to_knots(haversine_m(&records[a], &records[b]) / dt_s)
}

/// Find maximal stationary intervals: runs where the speed stays below the
/// stop threshold for at least the minimum stop duration.
///
/// Returns inclusive `(start, end)` index pairs, non-overlapping and ordered.
pub fn detect_stops(records: &[AisRecord], cfg: &SegmenterConfig) -> Vec<(usize, usize)> {
    let mut stops = Vec::new();
    let min_ms = cfg.min_stop_duration_s as i64 * 1000;
    let mut run_start: Option<usize> = None;

    for i in 0..=records.len() {
        let slow = i < records.len() && speed_at(records, i) < cfg.stop_speed_knots;
        match (run_start, slow) {
            (None, true) => run_start = Some(i),
            (Some(s), false) => {
                let e = i - 1;
                if records[e].ts - records[s].ts >= min_ms {
                    stops.push((s, e));
                }
                run_start = None;
            }
            _ => {}
        }
    }
    stops
}

/// Segment a cleaned single-vessel stream into trips.
///
/// Cut points: the first record of a stop ends the current trip and the last
/// record of the stop starts the next one; a time gap of at least the
/// threshold between consecutive records also cuts (both records retained,
/// in different trips). Trips with fewer than 3 points are discarded.
pub fn segment_trips(records: &[AisRecord], cfg: &SegmenterConfig) -> Vec<Trip> {
    if records.is_empty() {
        return Vec::new();
    }
    let stops = detect_stops(records, cfg);
    let gap_ms = cfg.gap_threshold_s as i64 * 1000;

    let mut trips = Vec::new();
    let mut current: Vec<AisRecord> = Vec::new();
    let mut stop_iter = stops.iter().copied().peekable();
    let mut i = 0;

    let mut flush = |points: &mut Vec<AisRecord>| {
        if points.len() >= 3 {
            let trip_id = trip_id_for(&points[0].vessel_id, points[0].ts);
            trips.push(Trip {
                trip_id,
                vessel_id: points[0].vessel_id.clone(),
                points: std::mem::take(points),
            });
        } else {
            points.clear();
        }
    };

    while i < records.len() {
        // Gap cut between the previous retained record and this one.
        if let Some(last) = current.last() {
            if records[i].ts - last.ts >= gap_ms {
                flush(&mut current);
            }
        }

        if let Some(&(s, e)) = stop_iter.peek() {
            if i == s {
                // Stop begins: its first record closes the current trip, its
                // last record opens the next. Interior records are dropped.
                current.push(records[s].clone());
                flush(&mut current);
                current.push(records[e].clone());
                i = e + 1;
                stop_iter.next();
                continue;
            }
        }

        current.push(records[i].clone());
        i += 1;
    }
    flush(&mut current);
    trips
}

/// Drop trips confined to one cell, or to two grid-adjacent cells, at the
/// given resolution. These are local displacements (drift, moored jitter)
/// with no transit information.
pub fn filter_micro_trips(trips: Vec<Trip>, resolution: Resolution) -> Vec<Trip> {
    trips
        .into_iter()
        .filter(|trip| {
            let mut cells: Vec<CellId> = trip
                .points
                .iter()
                .filter_map(|p| CellId::from_point(p, resolution).ok())
                .collect();
            cells.sort_unstable();
            cells.dedup();
            match cells.as_slice() {
                [] | [_] => false,
                [a, b] => !matches!(a.grid_distance(*b), Ok(1)),
                _ => true,
            }
        })
        .collect()
}

/// Group validated records by vessel, preserving input order within each
/// vessel. Ordering of groups is deterministic (sorted by vessel id).
pub fn group_by_vessel(records: Vec<AisRecord>) -> BTreeMap<String, Vec<AisRecord>> {
    let mut groups: BTreeMap<String, Vec<AisRecord>> = BTreeMap::new();
    for rec in records {
        groups.entry(rec.vessel_id.clone()).or_default().push(rec);
    }
    groups
}

/// Write trips as newline-delimited records tagged with their trip id, so
/// pipelines can resume from this artifact.
pub fn write_trips<W: Write>(writer: W, trips: &[Trip]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["trip_id", "vessel_id", "ts", "lon", "lat", "sog", "cog"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for trip in trips {
        for p in &trip.points {
            w.write_record([
                trip.trip_id.as_str(),
                p.vessel_id.as_str(),
                &format_timestamp(p.ts),
                &p.lon.to_string(),
                &p.lat.to_string(),
                &opt(p.sog),
                &opt(p.cog),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read trips written by [`write_trips`]. Consecutive rows sharing a trip id
/// form one trip.
pub fn read_trips<R: Read>(reader: R) -> Result<Vec<Trip>, String> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers().map_err(|e| e.to_string())?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| format!("trips file missing column `{name}`"))
    };
    let (ci_trip, ci_vessel, ci_ts, ci_lon, ci_lat, ci_sog, ci_cog) = (
        col("trip_id")?,
        col("vessel_id")?,
        col("ts")?,
        col("lon")?,
        col("lat")?,
        col("sog")?,
        col("cog")?,
    );

    let mut trips: Vec<Trip> = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| e.to_string())?;
        let field = |i: usize| row.get(i).unwrap_or("").trim();
        let parse_f64 = |i: usize, name: &str| -> Result<f64, String> {
            field(i)
                .parse()
                .map_err(|_| format!("trips file row {}: bad {name}", line + 2))
        };
        let parse_opt = |i: usize| -> Option<f64> { field(i).parse().ok() };

        let ts = chrono::DateTime::parse_from_rfc3339(field(ci_ts))
            .map_err(|_| format!("trips file row {}: bad ts", line + 2))?
            .timestamp_millis();
        let rec = AisRecord {
            vessel_id: field(ci_vessel).to_string(),
            ts,
            lon: parse_f64(ci_lon, "lon")?,
            lat: parse_f64(ci_lat, "lat")?,
            sog: parse_opt(ci_sog),
            cog: parse_opt(ci_cog),
        };
        let trip_id = field(ci_trip).to_string();
        match trips.last_mut() {
            Some(t) if t.trip_id == trip_id => t.points.push(rec),
            _ => trips.push(Trip {
                trip_id,
                vessel_id: rec.vessel_id.clone(),
                points: vec![rec],
            }),
        }
    }
    Ok(trips)
}
