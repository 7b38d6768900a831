//! GeoJSON (RFC 7946) emission for imputed paths and cell polygons.

use serde_json::{json, Value};

use crate::graph::TrafficGraph;
use crate::impute::ImputedPath;
use crate::model::format_timestamp;

/// Feature for one imputed gap: a LineString with per-point timestamps and
/// method/fallback properties.
pub fn imputed_path_feature(vessel_id: &str, trip_id: &str, path: &ImputedPath) -> Value {
    let coordinates: Vec<Value> = path.points.iter().map(|p| json!([p.lon, p.lat])).collect();
    let timestamps: Vec<Value> = path
        .points
        .iter()
        .map(|p| Value::String(format_timestamp(p.ts)))
        .collect();
    json!({
        "type": "Feature",
        "geometry": { "type": "LineString", "coordinates": coordinates },
        "properties": {
            "vessel_id": vessel_id,
            "trip_id": trip_id,
            "method": path.method,
            "fallback_used": path.fallback_used,
            "timestamps": timestamps,
            "cell_path": path.cell_path.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
        }
    })
}

/// Feature recording a per-gap failure; geometry is null so collections stay
/// well-formed when some gaps cannot be answered.
pub fn gap_error_feature(vessel_id: &str, trip_id: &str, error: &str) -> Value {
    json!({
        "type": "Feature",
        "geometry": Value::Null,
        "properties": {
            "vessel_id": vessel_id,
            "trip_id": trip_id,
            "error": error,
        }
    })
}

pub fn feature_collection(features: Vec<Value>) -> Value {
    json!({ "type": "FeatureCollection", "features": features })
}

/// One polygon feature per graph node, carrying the cell statistics; the
/// density-map feed.
pub fn graph_cells_collection(graph: &TrafficGraph) -> Value {
    let features: Vec<Value> = graph
        .nodes()
        .map(|(cell, attrs)| {
            // H3 boundaries are counterclockwise, matching the RFC 7946
            // winding for exterior rings; close the ring explicitly.
            let mut ring: Vec<Value> =
                cell.boundary().iter().map(|v| json!([v.lon, v.lat])).collect();
            if let Some(first) = ring.first().cloned() {
                ring.push(first);
            }
            json!({
                "type": "Feature",
                "geometry": { "type": "Polygon", "coordinates": [ring] },
                "properties": {
                    "cell": cell.to_string(),
                    "msg_count": attrs.msg_count,
                    "distinct_vessels": attrs.distinct_vessels,
                    "median_lon": attrs.median_lon,
                    "median_lat": attrs.median_lat,
                    "median_sog": attrs.median_sog,
                    "median_cog": attrs.median_cog,
                }
            })
        })
        .collect();
    feature_collection(features)
}
