//! JSON schemas for every request and response body.

use firecover_core::analytics::{SdSeries, StationProfile, StationSummary, YearDistribution};
use firecover_core::forecast::CellAttribution;
use firecover_core::mobility::UnderservedReport;
use firecover_core::optimizer::ParetoResult;
use schemars::schema_for;
use serde_json::{json, Value};

use crate::config::Config;
use crate::dataset::LoadReport;
use crate::error::ErrorBody;
use crate::jobs::{JobHandle, JobOutput};
use crate::ops::{EvaluateRequest, EvaluateResponse, GridView, OptimizeRequest, SimulateRequest, SimulateResult, YearCount};

pub const NAMES: &[&str] = &[
    "cell-attribution",
    "config",
    "error",
    "evaluate-request",
    "evaluate-response",
    "grid",
    "job",
    "job-list",
    "job-result",
    "load-report",
    "optimize-request",
    "pareto",
    "reachability",
    "response-distribution",
    "sd-series",
    "simulate-request",
    "simulation",
    "station-profile",
    "stations",
    "underserved",
    "yearly",
];

/// GeoJSON Feature with a MultiPolygon geometry, as served by the
/// reachability endpoint.
fn reachability() -> Value {
    let position = json!({ "type": "array", "items": { "type": "number" }, "minItems": 2, "maxItems": 2 });
    let ring = json!({ "type": "array", "items": position, "minItems": 4 });
    json!({
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "ReachabilityFeature",
        "type": "object",
        "required": ["type", "properties", "geometry"],
        "properties": {
            "type": { "const": "Feature" },
            "properties": {
                "type": "object",
                "required": ["k_minutes", "all_reachable"],
                "properties": {
                    "k_minutes": { "type": "number" },
                    "all_reachable": { "type": "boolean" }
                }
            },
            "geometry": {
                "type": "object",
                "required": ["type", "coordinates"],
                "properties": {
                    "type": { "const": "MultiPolygon" },
                    "coordinates": { "type": "array", "items": { "type": "array", "items": ring, "minItems": 1 } }
                }
            }
        }
    })
}

pub fn by_name(name: &str) -> Option<Value> {
    let schema = match name {
        "cell-attribution" => schema_for!(CellAttribution),
        "config" => schema_for!(Config),
        "error" => schema_for!(ErrorBody),
        "evaluate-request" => schema_for!(EvaluateRequest),
        "evaluate-response" => schema_for!(EvaluateResponse),
        "grid" => schema_for!(GridView),
        "job" => schema_for!(JobHandle),
        "job-list" => schema_for!(Vec<JobHandle>),
        "job-result" => schema_for!(JobOutput),
        "load-report" => schema_for!(LoadReport),
        "optimize-request" => schema_for!(OptimizeRequest),
        "pareto" => schema_for!(ParetoResult),
        "reachability" => return Some(reachability()),
        "response-distribution" => schema_for!(Vec<YearDistribution>),
        "sd-series" => schema_for!(SdSeries),
        "simulate-request" => schema_for!(SimulateRequest),
        "simulation" => schema_for!(SimulateResult),
        "station-profile" => schema_for!(StationProfile),
        "stations" => schema_for!(Vec<StationSummary>),
        "underserved" => schema_for!(UnderservedReport),
        "yearly" => schema_for!(Vec<YearCount>),
        _ => return None,
    };
    Some(schema.to_value())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_resolves() {
        for name in NAMES {
            let s = by_name(name).unwrap_or_else(|| panic!("{name}"));
            assert!(s.is_object(), "{name}");
        }
        assert!(by_name("nope").is_none());
    }
}
