//! Synthetic AIS corpora: corridors of repeated trips with seeded noise.
//!
//! Useful for trying the pipeline without real AIS data and for the test
//! and benchmark fixtures. A corridor is a great-circle-ish baseline with an
//! optional lateral sinusoid; trips run along it at constant speed with
//! per-trip lateral offsets and per-point jitter.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{AisRecord, TimestampMs};
use crate::segment::{trip_id_for, Trip};

/// Meters per degree of latitude (and of longitude at the equator).
const METERS_PER_DEG: f64 = 111_195.0;

#[derive(Debug, Clone)]
pub struct CorridorSpec {
    pub n_trips: usize,
    /// Distinct vessel ids to cycle through.
    pub n_vessels: usize,
    pub speed_knots: f64,
    /// Trip duration in minutes (sets trip length together with the speed).
    pub trip_duration_min: f64,
    /// Reporting interval in seconds.
    pub sample_interval_s: f64,
    /// Lateral sinusoid amplitude in meters; 0 gives a straight corridor.
    pub amplitude_m: f64,
    /// Sinusoid wavelength in meters.
    pub wavelength_m: f64,
    /// Standard deviation of the per-trip lateral offset, meters.
    pub trip_offset_m: f64,
    /// Standard deviation of per-point jitter, meters.
    pub jitter_m: f64,
    /// Corridor origin.
    pub base_lon: f64,
    pub base_lat: f64,
    /// Corridor baseline direction, degrees clockwise from north.
    pub bearing_deg: f64,
    /// First trip departure, UTC milliseconds.
    pub t0_ms: TimestampMs,
    /// Departure stagger between consecutive trips, minutes.
    pub departure_stagger_min: f64,
    pub seed: u64,
}

impl Default for CorridorSpec {
    fn default() -> Self {
        Self {
            n_trips: 200,
            n_vessels: 20,
            speed_knots: 13.0,
            trip_duration_min: 125.0,
            sample_interval_s: 60.0,
            amplitude_m: 8_000.0,
            wavelength_m: 100_000.0,
            trip_offset_m: 60.0,
            jitter_m: 60.0,
            base_lon: 11.0,
            base_lat: 56.0,
            bearing_deg: 75.0,
            t0_ms: 1_704_067_200_000, // 2024-01-01T00:00:00Z
            departure_stagger_min: 130.0,
            seed: 7,
        }
    }
}

impl CorridorSpec {
    /// A straight corridor (no sinusoid), otherwise the defaults.
    pub fn straight() -> Self {
        Self {
            amplitude_m: 0.0,
            ..Self::default()
        }
    }

    pub fn trip_length_m(&self) -> f64 {
        self.speed_knots * 1852.0 / 3600.0 * self.trip_duration_min * 60.0
    }
}

/// Standard normal via Box-Muller.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Generate the corridor corpus as ready-made trips.
pub fn corridor_trips(spec: &CorridorSpec) -> Vec<Trip> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let speed_mps = spec.speed_knots * 1852.0 / 3600.0;
    let n_samples = (spec.trip_duration_min * 60.0 / spec.sample_interval_s).floor() as usize + 1;

    let theta = spec.bearing_deg.to_radians();
    let (dir_e, dir_n) = (theta.sin(), theta.cos());
    let (normal_e, normal_n) = (-dir_n, dir_e);
    let cos_lat = spec.base_lat.to_radians().cos();

    let mut trips = Vec::with_capacity(spec.n_trips);
    for trip_idx in 0..spec.n_trips {
        let vessel_id = format!("SYN{:03}", trip_idx % spec.n_vessels.max(1));
        let depart =
            spec.t0_ms + (trip_idx as f64 * spec.departure_stagger_min * 60_000.0) as i64;
        let trip_offset = gaussian(&mut rng) * spec.trip_offset_m;

        let mut points = Vec::with_capacity(n_samples);
        for k in 0..n_samples {
            let t_s = k as f64 * spec.sample_interval_s;
            let along = speed_mps * t_s;
            let lateral = if spec.amplitude_m > 0.0 {
                spec.amplitude_m * (std::f64::consts::TAU * along / spec.wavelength_m).sin()
            } else {
                0.0
            } + trip_offset
                + gaussian(&mut rng) * spec.jitter_m;

            let east = along * dir_e + lateral * normal_e;
            let north = along * dir_n + lateral * normal_n;
            points.push(AisRecord {
                vessel_id: vessel_id.clone(),
                ts: depart + (t_s * 1000.0) as i64,
                lon: spec.base_lon + east / (METERS_PER_DEG * cos_lat),
                lat: spec.base_lat + north / METERS_PER_DEG,
                sog: Some(spec.speed_knots),
                cog: None,
            });
        }

        trips.push(Trip {
            trip_id: trip_id_for(&vessel_id, depart),
            vessel_id,
            points,
        });
    }
    trips
}

/// Flatten trips into raw positional records sorted by (vessel, time), the
/// shape an AIS dump arrives in.
pub fn corpus_records(trips: &[Trip]) -> Vec<AisRecord> {
    let mut records: Vec<AisRecord> = trips.iter().flat_map(|t| t.points.clone()).collect();
    records.sort_by(|a, b| a.vessel_id.cmp(&b.vessel_id).then(a.ts.cmp(&b.ts)));
    records
}
