use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::process::{Command, Output};

use chrono::NaiveDate;
use firecover_core::geo::{offset_km, GeoPoint, GridSpec};
use firecover_core::ingest::{read_tensor, write_fire_records, write_stations};
use firecover_core::mobility::{boundary, reachability_field, TravelParams};
use firecover_core::model::{FireRecord, Role, Station};
use serde_json::{json, Value};

fn firecover(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_firecover")).args(args).output().unwrap()
}

fn at(east_km: f64, north_km: f64) -> GeoPoint {
    offset_km(GeoPoint::new(30.0, 120.0).unwrap(), east_km, north_km)
}

/// Writes the three-fire fixture and a config for it into `dir`.
fn three_fire_files(dir: &Path) -> (Vec<Station>, GridSpec) {
    let stations = vec![Station {
        id: "A".into(),
        location: at(20.0, 0.0),
        commissioned: NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(),
        staffing: Some(12),
    }];
    let fire = |id: &str, loc: GeoPoint, month: u32| FireRecord {
        id: id.into(),
        location: loc,
        alarm_time: NaiveDate::from_ymd_opt(2019, month, 5).unwrap().and_hms_opt(12, 0, 0).unwrap(),
        response_time_min: 15.0,
        station_id: "A".into(),
        role: Role::Primary,
    };
    let fires = [fire("f1", at(0.0, 1.0), 1), fire("f2", at(1.0, 0.0), 2), fire("f3", at(10.0, 0.0), 3)];
    write_fire_records(&fires, File::create(dir.join("fires.csv")).unwrap()).unwrap();
    write_stations(&stations, File::create(dir.join("stations.csv")).unwrap()).unwrap();
    let grid = GridSpec::new(at(-5.0, -5.0), 1.0, 10, 30).unwrap();
    let config = json!({
        "data": { "fires": "fires.csv", "stations": "stations.csv" },
        "grid": grid,
    });
    std::fs::write(dir.join("config.json"), config.to_string()).unwrap();
    (stations, grid)
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn reach_matches_boundary() {
    let dir = tempfile::tempdir().unwrap();
    let (stations, grid) = three_fire_files(dir.path());
    let config = dir.path().join("config.json");
    let got = stdout_json(&firecover(&["-c", config.to_str().unwrap(), "reach", "--k", "9"]));
    let field = reachability_field(&stations, &grid, &TravelParams::default()).unwrap();
    assert_eq!(got, boundary(&field, 9.0).unwrap().to_geojson());
    assert_eq!(got["geometry"]["type"], "MultiPolygon");
}

#[test]
fn simulate_single_solution_file() {
    let dir = tempfile::tempdir().unwrap();
    three_fire_files(dir.path());
    let o = at(0.0, 0.0);
    let sol = dir.path().join("sol.json");
    std::fs::write(&sol, json!({ "id": "here", "genome": [{ "lat": o.lat, "lng": o.lng }] }).to_string()).unwrap();
    let config = dir.path().join("config.json");
    let out = stdout_json(&firecover(&[
        "-c",
        config.to_str().unwrap(),
        "simulate",
        "--solution",
        sol.to_str().unwrap(),
        "--bucketing",
        "month",
    ]));
    let report = &out["reports"][0];
    assert_eq!(report["solution_id"], "here");
    assert_eq!(report["bucketing"], "month");
    let periods: Vec<&str> = report["periods"].as_array().unwrap().iter().map(|p| p["period"].as_str().unwrap()).collect();
    assert_eq!(periods, ["2019-01", "2019-02", "2019-03"]);
    assert_eq!(out["comparison"]["transferred"], json!([[1], [1], [0]]));
    let overall = &report["overall"];
    assert_eq!(overall["edges"], json!([{ "from": "A", "to": "new-0", "weight": 2 }]));
    let nodes = overall["nodes"].as_array().unwrap();
    assert_eq!((nodes[0]["before"].as_u64(), nodes[0]["after"].as_u64()), (Some(3), Some(1)));
    assert_eq!(nodes[1]["assigned"], 2);
}

#[test]
fn ingest_writes_a_readable_tensor() {
    let dir = tempfile::tempdir().unwrap();
    let (_, grid) = three_fire_files(dir.path());
    let config = dir.path().join("config.json");
    let tensor_path = dir.path().join("t.bin");
    let report = stdout_json(&firecover(&["-c", config.to_str().unwrap(), "ingest", "--tensor", tensor_path.to_str().unwrap()]));
    assert_eq!(report["fire_records"], 3);
    assert!(report["forecast_error"].is_string());
    let tensor = read_tensor(BufReader::new(File::open(&tensor_path).unwrap())).unwrap();
    assert_eq!(tensor.grid, grid);
    assert_eq!(tensor.len(), 3);
    let counts: f64 = (0..3).map(|t| tensor.plane(t, 0).iter().sum::<f64>()).sum();
    assert_eq!(counts, 3.0);
}

#[test]
fn failures_are_machine_readable() {
    let out = firecover(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "usage");

    let out = firecover(&["-c", "/nonexistent/config.json", "stats"]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"]["message"].as_str().unwrap().contains("/nonexistent/config.json"));

    let dir = tempfile::tempdir().unwrap();
    three_fire_files(dir.path());
    let config = dir.path().join("config.json");
    let out = firecover(&["-c", config.to_str().unwrap(), "profile", "--station", "Z"]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "unknown_station");
}

#[test]
fn schema_lists_names() {
    let names = stdout_json(&firecover(&["schema"]));
    assert!(names.as_array().unwrap().iter().any(|n| n == "pareto"));
    let pareto = stdout_json(&firecover(&["schema", "pareto"]));
    assert!(pareto["properties"]["solutions"].is_object());
}
