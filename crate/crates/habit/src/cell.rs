//! Hexagonal cell indexing, conforming to the H3 standard.
//!
//! Cell ids are bit-compatible with reference H3 implementations, so graph
//! files and exports interoperate with external H3 tooling.

use std::fmt;
use std::str::FromStr;

use h3o::{CellIndex, LatLng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::LonLat;
use crate::model::GeoPoint;

#[derive(Debug, Error, PartialEq)]
pub enum CellError {
    #[error("invalid H3 resolution {0} (expected 0..=15)")]
    InvalidResolution(u8),
    #[error("invalid H3 cell index {0:#x}")]
    InvalidIndex(u64),
    #[error("coordinates are not finite")]
    NonFiniteCoordinate,
    #[error("`{0}` is not a hexadecimal H3 cell index")]
    UnparseableCell(String),
    #[error("cells {0} and {1} have different resolutions")]
    ResolutionMismatch(CellId, CellId),
    #[error("grid distance between {0} and {1} is undefined")]
    DistanceUndefined(CellId, CellId),
}

/// Grid resolution, 0 (coarsest) to 15 (finest).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Resolution(u8);

impl Resolution {
    pub fn new(value: u8) -> Result<Self, CellError> {
        if value <= 15 {
            Ok(Self(value))
        } else {
            Err(CellError::InvalidResolution(value))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// Average hexagon edge length at this resolution, in meters.
    pub fn avg_edge_length_m(self) -> f64 {
        h3o::Resolution::from(self).edge_length_km() * 1000.0
    }

    /// Average corner-to-corner hexagon diameter at this resolution, in
    /// meters (twice the edge length).
    pub fn avg_cell_diameter_m(self) -> f64 {
        2.0 * self.avg_edge_length_m()
    }
}

impl From<Resolution> for h3o::Resolution {
    fn from(r: Resolution) -> Self {
        h3o::Resolution::try_from(r.0).expect("validated at construction")
    }
}

impl From<Resolution> for u8 {
    fn from(r: Resolution) -> Self {
        r.0
    }
}

impl TryFrom<u8> for Resolution {
    type Error = CellError;
    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A 64-bit H3 cell index at a fixed resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct CellId(CellIndex);

impl CellId {
    /// Cell containing `point` at the given resolution.
    pub fn from_point<P: LonLat>(point: &P, resolution: Resolution) -> Result<Self, CellError> {
        let ll = LatLng::new(point.lat(), point.lon())
            .map_err(|_| CellError::NonFiniteCoordinate)?;
        Ok(Self(ll.to_cell(resolution.into())))
    }

    pub fn from_u64(value: u64) -> Result<Self, CellError> {
        CellIndex::try_from(value)
            .map(Self)
            .map_err(|_| CellError::InvalidIndex(value))
    }

    pub fn as_u64(self) -> u64 {
        self.0.into()
    }

    pub fn resolution(self) -> Resolution {
        Resolution(u8::from(self.0.resolution()))
    }

    /// Geometric center of the cell (lon, lat) per the H3 standard.
    pub fn center(self) -> GeoPoint {
        let ll = LatLng::from(self.0);
        GeoPoint::new(ll.lng(), ll.lat())
    }

    /// Cell boundary vertices (lon, lat), unclosed, in H3 vertex order.
    pub fn boundary(self) -> Vec<GeoPoint> {
        self.0
            .boundary()
            .iter()
            .map(|ll| GeoPoint::new(ll.lng(), ll.lat()))
            .collect()
    }

    /// Minimum number of grid steps between two cells of equal resolution.
    ///
    /// The H3 standard leaves the distance undefined for some distant pairs
    /// (pentagon distortion across icosahedron faces); those report
    /// [`CellError::DistanceUndefined`].
    pub fn grid_distance(self, other: CellId) -> Result<u32, CellError> {
        if self.resolution() != other.resolution() {
            return Err(CellError::ResolutionMismatch(self, other));
        }
        match self.0.grid_distance(other.0) {
            Ok(d) => Ok(d as u32),
            Err(_) => Err(CellError::DistanceUndefined(self, other)),
        }
    }

    /// All cells within `k` grid steps, paired with their distance from
    /// `self`. Includes `self` at distance 0.
    pub fn disk_with_distances(self, k: u32) -> Vec<(CellId, u32)> {
        self.0
            .grid_disk_distances::<Vec<_>>(k)
            .into_iter()
            .map(|(cell, dist)| (Self(cell), dist))
            .collect()
    }

    /// Cells at exactly `k` grid steps.
    pub fn ring(self, k: u32) -> Vec<CellId> {
        self.0.grid_ring::<Vec<_>>(k).into_iter().map(Self).collect()
    }
}

impl PartialOrd for CellId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CellId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.as_u64().cmp(&other.as_u64())
    }
}

// Cell ids print as the usual 15-digit lowercase hex used by H3 tooling.
impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:x}", self.as_u64())
    }
}

impl FromStr for CellId {
    type Err = CellError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let value = u64::from_str_radix(s.trim(), 16)
            .map_err(|_| CellError::UnparseableCell(s.trim().to_string()))?;
        Self::from_u64(value)
    }
}

impl TryFrom<u64> for CellId {
    type Error = CellError;
    fn try_from(value: u64) -> Result<Self, Self::Error> {
        Self::from_u64(value)
    }
}

impl From<CellId> for u64 {
    fn from(cell: CellId) -> Self {
        cell.as_u64()
    }
}
