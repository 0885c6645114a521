#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use chrono::NaiveDate;
use firecover::config::{Config, DataPaths, Defaults, ServerConfig};
use firecover::dataset::Dataset;
use firecover::{router, AppState};
use firecover_core::geo::{offset_km, GeoPoint, GridSpec};
use firecover_core::model::{FireRecord, Role, Station};
use firecover_core::synthetic::{synthetic_city, SyntheticSpec};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

pub fn origin() -> GeoPoint {
    GeoPoint::new(30.0, 120.0).unwrap()
}

pub fn at(east_km: f64, north_km: f64) -> GeoPoint {
    offset_km(origin(), east_km, north_km)
}

fn config(grid: GridSpec) -> Config {
    Config {
        data: DataPaths { fires: "unused.csv".into(), stations: "unused.csv".into(), features: None },
        grid,
        window: None,
        travel: Default::default(),
        forecast: Default::default(),
        defaults: Defaults::default(),
        server: ServerConfig::default(),
    }
}

/// Station A 20 km east of the origin and three primary responses of 15
/// minutes: two near the origin, one 10 km east of it.
pub fn three_fire_dataset() -> Dataset {
    let grid = GridSpec::new(at(-5.0, -5.0), 1.0, 10, 30).unwrap();
    let station = Station {
        id: "A".into(),
        location: at(20.0, 0.0),
        commissioned: NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(),
        staffing: None,
    };
    let fire = |id: &str, loc: GeoPoint, month: u32| FireRecord {
        id: id.into(),
        location: loc,
        alarm_time: NaiveDate::from_ymd_opt(2019, month, 5).unwrap().and_hms_opt(12, 0, 0).unwrap(),
        response_time_min: 15.0,
        station_id: "A".into(),
        role: Role::Primary,
    };
    let fires = vec![fire("f1", at(0.0, 1.0), 1), fire("f2", at(1.0, 0.0), 2), fire("f3", at(10.0, 0.0), 3)];
    Dataset::from_parts(config(grid), fires, vec![station], Vec::new(), Vec::new()).unwrap()
}

pub fn synthetic_dataset() -> Dataset {
    let spec = SyntheticSpec { rows: 10, cols: 12, months: 24, stations: 4, seed: 3, ..SyntheticSpec::default() };
    let city = synthetic_city(&spec).unwrap();
    let mut cfg = config(city.grid);
    cfg.travel = spec.travel;
    Dataset::from_parts(cfg, city.fires, city.stations, city.features, Vec::new()).unwrap()
}

pub fn app(ds: Dataset) -> Router {
    router(Arc::new(AppState::new(ds)))
}

pub async fn call(app: &Router, method: Method, uri: &str, body: Option<&str>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header("content-type", "application/json");
    }
    let req = req.body(body.map(|b| Body::from(b.to_string())).unwrap_or_else(Body::empty)).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

pub async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, Method::GET, uri, None).await
}

pub async fn post(app: &Router, uri: &str, body: &str) -> (StatusCode, Value) {
    call(app, Method::POST, uri, Some(body)).await
}

/// Asserts `value` validates against the published schema `name`.
pub fn assert_schema(name: &str, value: &Value) {
    let schema = firecover::schema::by_name(name).unwrap_or_else(|| panic!("no schema {name}"));
    let validator = jsonschema::validator_for(&schema).unwrap_or_else(|e| panic!("schema {name} does not compile: {e}"));
    let errors: Vec<String> = validator.iter_errors(value).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{name}: {errors:#?}");
}
