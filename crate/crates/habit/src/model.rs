//! Positional report records, input schema mapping, and record-level validation.
//!
//! Raw data arrives as header-bearing delimited text whose column layout
//! varies by source, so parsing goes through a user-supplied [`InputSchema`]
//! that names the columns carrying each field.

use std::fmt;

use chrono::{DateTime, NaiveDateTime, SecondsFormat, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::LonLat;

/// UTC timestamp in milliseconds since the Unix epoch.
pub type TimestampMs = i64;

/// One positional report from a vessel transponder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AisRecord {
    /// Transmitter identity (MMSI role); treated as an opaque string.
    pub vessel_id: String,
    /// Receive timestamp, UTC milliseconds.
    pub ts: TimestampMs,
    /// Longitude in degrees, [-180, 180].
    pub lon: f64,
    /// Latitude in degrees, [-90, 90].
    pub lat: f64,
    /// Speed over ground in knots, if reported.
    pub sog: Option<f64>,
    /// Course over ground in degrees [0, 360), if reported.
    pub cog: Option<f64>,
}

impl LonLat for AisRecord {
    fn lon(&self) -> f64 {
        self.lon
    }
    fn lat(&self) -> f64 {
        self.lat
    }
}

/// A bare coordinate pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lon: f64,
    pub lat: f64,
}

impl GeoPoint {
    pub fn new(lon: f64, lat: f64) -> Self {
        Self { lon, lat }
    }
}

impl LonLat for GeoPoint {
    fn lon(&self) -> f64 {
        self.lon
    }
    fn lat(&self) -> f64 {
        self.lat
    }
}

/// A coordinate pair with a timestamp, as produced by imputation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedPoint {
    pub lon: f64,
    pub lat: f64,
    pub ts: TimestampMs,
}

impl TimedPoint {
    pub fn new(lon: f64, lat: f64, ts: TimestampMs) -> Self {
        Self { lon, lat, ts }
    }

    pub fn position(&self) -> GeoPoint {
        GeoPoint::new(self.lon, self.lat)
    }
}

impl LonLat for TimedPoint {
    fn lon(&self) -> f64 {
        self.lon
    }
    fn lat(&self) -> f64 {
        self.lat
    }
}

/// Why a record was dropped. Rejections are data, not failures; ingestion
/// reports counts per reason.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RejectReason {
    InvalidCoordinates,
    DuplicateRecord,
    OutOfOrder,
    KinematicOutlier,
    MalformedField,
}

impl RejectReason {
    pub const ALL: [RejectReason; 5] = [
        RejectReason::InvalidCoordinates,
        RejectReason::DuplicateRecord,
        RejectReason::OutOfOrder,
        RejectReason::KinematicOutlier,
        RejectReason::MalformedField,
    ];
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RejectReason::InvalidCoordinates => "invalid_coordinates",
            RejectReason::DuplicateRecord => "duplicate_record",
            RejectReason::OutOfOrder => "out_of_order",
            RejectReason::KinematicOutlier => "kinematic_outlier",
            RejectReason::MalformedField => "malformed_field",
        };
        f.write_str(s)
    }
}

/// Timestamp encodings accepted by the parser. Sources without an offset are
/// assumed UTC.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TsFormat {
    /// RFC 3339 / ISO 8601, e.g. `2024-01-05T10:00:00Z`.
    #[default]
    Rfc3339,
    /// Integer or fractional seconds since the Unix epoch.
    EpochS,
    /// Integer milliseconds since the Unix epoch.
    EpochMs,
    /// A chrono format string, e.g. `%d/%m/%Y %H:%M:%S`.
    #[serde(untagged)]
    Custom(String),
}

/// Maps source column names onto record fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSchema {
    pub vessel_id: String,
    pub timestamp: String,
    pub lon: String,
    pub lat: String,
    #[serde(default)]
    pub sog: Option<String>,
    #[serde(default)]
    pub cog: Option<String>,
    #[serde(default)]
    pub ts_format: TsFormat,
}

impl InputSchema {
    /// Identity mapping for the canonical column layout
    /// `vessel_id,ts,lon,lat,sog,cog`.
    pub fn identity() -> Self {
        Self {
            vessel_id: "vessel_id".into(),
            timestamp: "ts".into(),
            lon: "lon".into(),
            lat: "lat".into(),
            sog: Some("sog".into()),
            cog: Some("cog".into()),
            ts_format: TsFormat::Rfc3339,
        }
    }

    /// Resolve column names against a header row. Fails fast when a required
    /// column is absent.
    pub fn resolve(&self, headers: &csv::StringRecord) -> Result<ResolvedSchema, ParseError> {
        let find = |name: &str| headers.iter().position(|h| h.trim() == name);
        let required = |name: &str| {
            find(name).ok_or_else(|| ParseError::MissingColumn {
                column: name.to_string(),
            })
        };
        Ok(ResolvedSchema {
            vessel_id: required(&self.vessel_id)?,
            timestamp: required(&self.timestamp)?,
            lon: required(&self.lon)?,
            lat: required(&self.lat)?,
            sog: self.sog.as_deref().and_then(find),
            cog: self.cog.as_deref().and_then(find),
            ts_format: self.ts_format.clone(),
        })
    }
}

/// Column indices after matching an [`InputSchema`] against a header row.
#[derive(Debug, Clone)]
pub struct ResolvedSchema {
    pub vessel_id: usize,
    pub timestamp: usize,
    pub lon: usize,
    pub lat: usize,
    pub sog: Option<usize>,
    pub cog: Option<usize>,
    pub ts_format: TsFormat,
}

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("required column `{column}` not found in header")]
    MissingColumn { column: String },
    #[error("column `{column}` is missing or empty")]
    MissingField { column: String },
    #[error("column `{column}` has unparseable value `{value}`")]
    BadField { column: String, value: String },
}

/// Parse one delimited row into a record.
///
/// Required fields (vessel id, timestamp, lon, lat) must parse; optional
/// fields that are empty or out of their physical range are marked absent.
pub fn parse_record(
    row: &csv::StringRecord,
    schema: &ResolvedSchema,
) -> Result<AisRecord, ParseError> {
    let required = |idx: usize, column: &str| -> Result<&str, ParseError> {
        match row.get(idx).map(str::trim) {
            Some(v) if !v.is_empty() => Ok(v),
            _ => Err(ParseError::MissingField {
                column: column.to_string(),
            }),
        }
    };
    let bad = |column: &str, value: &str| ParseError::BadField {
        column: column.to_string(),
        value: value.to_string(),
    };

    let vessel_id = required(schema.vessel_id, "vessel_id")?.to_string();

    let ts_raw = required(schema.timestamp, "timestamp")?;
    let ts = parse_timestamp(ts_raw, &schema.ts_format).ok_or_else(|| bad("timestamp", ts_raw))?;

    let lon_raw = required(schema.lon, "lon")?;
    let lon: f64 = lon_raw.parse().map_err(|_| bad("lon", lon_raw))?;
    let lat_raw = required(schema.lat, "lat")?;
    let lat: f64 = lat_raw.parse().map_err(|_| bad("lat", lat_raw))?;

    // Optional kinematics: empty or nonsensical values become absent rather
    // than killing the row. AIS feeds routinely carry unavailable markers.
    let optional_f64 = |idx: Option<usize>| -> Option<f64> {
        let v = row.get(idx?)?.trim();
        if v.is_empty() {
            return None;
        }
        v.parse::<f64>().ok().filter(|x| x.is_finite())
    };
    let sog = optional_f64(schema.sog).filter(|&s| s >= 0.0);
    let cog = optional_f64(schema.cog)
        .filter(|&c| (0.0..=360.0).contains(&c))
        .map(|c| if c == 360.0 { 0.0 } else { c });

    Ok(AisRecord {
        vessel_id,
        ts,
        lon,
        lat,
        sog,
        cog,
    })
}

/// Record-level validation. Stream-level checks (duplicates, ordering,
/// kinematics) happen during cleaning; this only inspects one record.
///
/// (0, 0) is rejected: receivers emit null island for missing fixes.
pub fn validate_record(rec: &AisRecord) -> Result<(), RejectReason> {
    let lon_ok = rec.lon.is_finite() && (-180.0..=180.0).contains(&rec.lon);
    let lat_ok = rec.lat.is_finite() && (-90.0..=90.0).contains(&rec.lat);
    if !lon_ok || !lat_ok || (rec.lon == 0.0 && rec.lat == 0.0) {
        return Err(RejectReason::InvalidCoordinates);
    }
    Ok(())
}

fn parse_timestamp(raw: &str, format: &TsFormat) -> Option<TimestampMs> {
    match format {
        TsFormat::Rfc3339 => DateTime::parse_from_rfc3339(raw)
            .ok()
            .map(|dt| dt.with_timezone(&Utc).timestamp_millis()),
        TsFormat::EpochS => {
            let secs: f64 = raw.parse().ok().filter(|s: &f64| s.is_finite())?;
            Some((secs * 1000.0).round() as TimestampMs)
        }
        TsFormat::EpochMs => raw.parse().ok(),
        TsFormat::Custom(fmt) => NaiveDateTime::parse_from_str(raw, fmt)
            .ok()
            .map(|naive| Utc.from_utc_datetime(&naive).timestamp_millis()),
    }
}

/// Render a timestamp as RFC 3339 with millisecond precision.
pub fn format_timestamp(ts: TimestampMs) -> String {
    DateTime::<Utc>::from_timestamp_millis(ts)
        .unwrap_or_default()
        .to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Serialize a record into the canonical column layout (the inverse of
/// parsing with the identity schema).
pub fn record_to_fields(rec: &AisRecord) -> [String; 6] {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    [
        rec.vessel_id.clone(),
        format_timestamp(rec.ts),
        rec.lon.to_string(),
        rec.lat.to_string(),
        opt(rec.sog),
        opt(rec.cog),
    ]
}

/// Canonical header matching [`record_to_fields`].
pub const CANONICAL_HEADER: [&str; 6] = ["vessel_id", "ts", "lon", "lat", "sog", "cog"];
