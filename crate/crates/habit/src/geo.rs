//! Great-circle geometry on a spherical Earth model.
//!
//! All distances are in meters, bearings in degrees clockwise from north.
//! Inputs and outputs use degrees; radians never cross a function boundary.

/// Mean Earth radius in meters (IUGG).
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Meters per nautical mile.
pub const METERS_PER_NM: f64 = 1_852.0;

/// Convert a speed in meters/second to knots.
pub fn mps_to_knots(mps: f64) -> f64 {
    mps * 3_600.0 / METERS_PER_NM
}

/// Minimal lon/lat accessor so geometry helpers work on any point-like type.
pub trait LonLat {
    fn lon(&self) -> f64;
    fn lat(&self) -> f64;
}

impl LonLat for (f64, f64) {
    // Tuple order is (lon, lat), matching GeoJSON.
    fn lon(&self) -> f64 {
        self.0
    }
    fn lat(&self) -> f64 {
        self.1
    }
}

/// Haversine great-circle distance in meters.
pub fn haversine_m<A: LonLat, B: LonLat>(a: &A, b: &B) -> f64 {
    let lat1 = a.lat().to_radians();
    let lat2 = b.lat().to_radians();
    let dlat = (b.lat() - a.lat()).to_radians();
    let dlon = (b.lon() - a.lon()).to_radians();

    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Initial bearing (forward azimuth) from `a` to `b`, degrees in [0, 360).
pub fn initial_bearing_deg<A: LonLat, B: LonLat>(a: &A, b: &B) -> f64 {
    let lat1 = a.lat().to_radians();
    let lat2 = b.lat().to_radians();
    let dlon = (b.lon() - a.lon()).to_radians();

    let y = dlon.sin() * lat2.cos();
    let x = lat1.cos() * lat2.sin() - lat1.sin() * lat2.cos() * dlon.cos();
    let deg = y.atan2(x).to_degrees();
    (deg + 360.0) % 360.0
}

/// Fold a bearing difference into an absolute turn angle in [0, 180].
pub fn fold_turn_deg(delta: f64) -> f64 {
    let d = delta.rem_euclid(360.0);
    if d > 180.0 {
        360.0 - d
    } else {
        d
    }
}

/// Distance in meters from point `p` to the great-circle segment `a`->`b`.
///
/// Cross-track distance when the along-track projection of `p` falls within
/// the segment; distance to the nearer endpoint otherwise. A degenerate
/// segment (coincident endpoints) reduces to plain point distance.
pub fn segment_distance_m<P: LonLat, A: LonLat, B: LonLat>(p: &P, a: &A, b: &B) -> f64 {
    let seg_len = haversine_m(a, b);
    let d_ap = haversine_m(a, p);
    if seg_len < 1e-9 {
        return d_ap;
    }
    if d_ap < 1e-9 {
        return 0.0;
    }

    let delta13 = d_ap / EARTH_RADIUS_M;
    let theta13 = initial_bearing_deg(a, p).to_radians();
    let theta12 = initial_bearing_deg(a, b).to_radians();

    let cross = (delta13.sin() * (theta13 - theta12).sin()).asin();
    // Signed along-track arc; negative means p projects behind a.
    let along = (delta13.cos() / cross.cos().abs().max(f64::MIN_POSITIVE)).clamp(-1.0, 1.0).acos()
        * (theta13 - theta12).cos().signum();

    if along <= 0.0 {
        d_ap
    } else if along * EARTH_RADIUS_M >= seg_len {
        haversine_m(b, p)
    } else {
        (cross * EARTH_RADIUS_M).abs()
    }
}

/// Intermediate point at `fraction` (0..=1) along the great circle `a`->`b`.
///
/// Returns `(lon, lat)`. Spherical linear interpolation on unit vectors, so
/// the result lies on the great circle and fractions are arc-length uniform.
pub fn interpolate<A: LonLat, B: LonLat>(a: &A, b: &B, fraction: f64) -> (f64, f64) {
    let va = to_unit_vector(a);
    let vb = to_unit_vector(b);
    let dot = (va[0] * vb[0] + va[1] * vb[1] + va[2] * vb[2]).clamp(-1.0, 1.0);
    let omega = dot.acos();

    if omega < 1e-12 {
        return (a.lon(), a.lat());
    }

    let sin_omega = omega.sin();
    let wa = ((1.0 - fraction) * omega).sin() / sin_omega;
    let wb = (fraction * omega).sin() / sin_omega;
    from_unit_vector([
        wa * va[0] + wb * vb[0],
        wa * va[1] + wb * vb[1],
        wa * va[2] + wb * vb[2],
    ])
}

fn to_unit_vector<P: LonLat>(p: &P) -> [f64; 3] {
    let lat = p.lat().to_radians();
    let lon = p.lon().to_radians();
    [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
}

fn from_unit_vector(v: [f64; 3]) -> (f64, f64) {
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let lat = (v[2] / norm).asin().to_degrees();
    let lon = v[1].atan2(v[0]).to_degrees();
    (lon, lat)
}

/// Cumulative haversine length of a polyline, in meters.
pub fn polyline_length_m<P: LonLat>(points: &[P]) -> f64 {
    points.windows(2).map(|w| haversine_m(&w[0], &w[1])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    const METERS_PER_DEG_LAT: f64 = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;

    #[test]
    fn haversine_zero_for_identical_points() {
        assert_eq!(haversine_m(&(12.5, 55.6), &(12.5, 55.6)), 0.0);
    }

    #[test]
    fn haversine_one_degree_latitude() {
        let d = haversine_m(&(0.0, 0.0), &(0.0, 1.0));
        assert!((d - METERS_PER_DEG_LAT).abs() < 1e-6, "got {d}");
    }

    #[test]
    fn bearing_cardinal_directions() {
        assert!((initial_bearing_deg(&(0.0, 0.0), &(0.0, 1.0)) - 0.0).abs() < 1e-9);
        assert!((initial_bearing_deg(&(0.0, 0.0), &(1.0, 0.0)) - 90.0).abs() < 1e-9);
        assert!((initial_bearing_deg(&(0.0, 1.0), &(0.0, 0.0)) - 180.0).abs() < 1e-9);
        assert!((initial_bearing_deg(&(1.0, 0.0), &(0.0, 0.0)) - 270.0).abs() < 1e-9);
    }

    #[test]
    fn fold_turn_handles_wraparound() {
        assert_eq!(fold_turn_deg(90.0), 90.0);
        assert_eq!(fold_turn_deg(-90.0), 90.0);
        assert_eq!(fold_turn_deg(350.0), 10.0);
        assert_eq!(fold_turn_deg(180.0), 180.0);
        assert_eq!(fold_turn_deg(-350.0), 10.0);
    }

    #[test]
    fn segment_distance_perpendicular_offset() {
        // Middle point lifted off the equator; cross-track equals the lift.
        let a = (0.0, 0.0);
        let b = (0.02, 0.0);
        let off_deg = 300.0 / METERS_PER_DEG_LAT;
        let p = (0.01, off_deg);
        let d = segment_distance_m(&p, &a, &b);
        assert!((d - 300.0).abs() < 0.05, "got {d}");
    }

    #[test]
    fn segment_distance_clamps_to_endpoints() {
        let a = (0.0, 0.0);
        let b = (0.01, 0.0);
        // Beyond b along the equator: distance to b, not cross-track (0).
        let p = (0.03, 0.0);
        let expected = haversine_m(&p, &b);
        let d = segment_distance_m(&p, &a, &b);
        assert!((d - expected).abs() < 1e-6, "got {d} expected {expected}");
        // Behind a.
        let q = (-0.02, 0.001);
        let d = segment_distance_m(&q, &a, &b);
        assert!((d - haversine_m(&q, &a)).abs() < 1e-6);
    }

    #[test]
    fn segment_distance_degenerate_segment() {
        let a = (10.0, 50.0);
        let p = (10.01, 50.0);
        let d = segment_distance_m(&p, &a, &a);
        assert!((d - haversine_m(&p, &a)).abs() < 1e-9);
    }

    #[test]
    fn interpolate_midpoint_lies_on_great_circle() {
        let a = (12.0, 55.0);
        let b = (13.0, 56.0);
        let (lon, lat) = interpolate(&a, &b, 0.5);
        // Independent check: midpoint from normalized vector sum.
        let va = to_unit_vector(&a);
        let vb = to_unit_vector(&b);
        let (elon, elat) =
            from_unit_vector([va[0] + vb[0], va[1] + vb[1], va[2] + vb[2]]);
        assert!((lon - elon).abs() < 1e-9);
        assert!((lat - elat).abs() < 1e-9);
        // And fractions are arc-length uniform.
        let d_am = haversine_m(&a, &(lon, lat));
        let d_mb = haversine_m(&(lon, lat), &b);
        assert!((d_am - d_mb).abs() < 1e-6);
    }

    #[test]
    fn interpolate_endpoints_are_exact() {
        let a = (12.0, 55.0);
        let b = (13.0, 56.0);
        let p0 = interpolate(&a, &b, 0.0);
        let p1 = interpolate(&a, &b, 1.0);
        assert!(haversine_m(&p0, &a) < 1e-6);
        assert!(haversine_m(&p1, &b) < 1e-6);
    }
}
