//! Loaded inputs plus everything derived from them once at startup.

use std::fs::File;
use std::io::BufReader;

use anyhow::Context;
use firecover_core::forecast::{attribute, fit, AttributionFrame, FittedForecaster};
use firecover_core::ingest::{parse_features, parse_fire_records, parse_stations, rasterize, FeatureTable, Reject};
use firecover_core::mobility::{reachability_field, ReachabilityField};
use firecover_core::model::{FireRecord, MonthWindow, SpatioTemporalTensor, Station};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::config::Config;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct RejectSummary {
    pub file: String,
    pub line: u64,
    pub reason: String,
}

/// Record counts and quarantined rows from loading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct LoadReport {
    pub fire_records: usize,
    pub stations: usize,
    pub feature_tables: Vec<String>,
    pub window: MonthWindow,
    pub skipped_out_of_extent: usize,
    pub skipped_out_of_window: usize,
    /// Fire ids whose responding station is not in the station file.
    pub unknown_station_fires: Vec<String>,
    pub rejects: Vec<RejectSummary>,
    /// Why no forecast is available, if so.
    pub forecast_error: Option<String>,
}

pub struct Dataset {
    pub config: Config,
    pub fires: Vec<FireRecord>,
    pub stations: Vec<Station>,
    pub features: Vec<FeatureTable>,
    pub tensor: SpatioTemporalTensor,
    /// Present when the history is long enough to fit.
    pub forecast: Option<(FittedForecaster, AttributionFrame)>,
    pub report: LoadReport,
}

fn open(path: &std::path::Path) -> anyhow::Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn note(file: &str, rejects: Vec<Reject>) -> impl Iterator<Item = RejectSummary> + '_ {
    rejects.into_iter().map(move |r| RejectSummary { file: file.to_string(), line: r.line, reason: r.reason })
}

impl Dataset {
    pub fn load(config: Config) -> anyhow::Result<Self> {
        let fires = parse_fire_records(open(&config.data.fires)?).context("reading fire records")?;
        let stations = parse_stations(open(&config.data.stations)?).context("reading stations")?;
        let features = match &config.data.features {
            Some(p) => parse_features(open(p)?).context("reading features")?,
            None => firecover_core::ingest::Parsed { records: Vec::new(), rejects: Vec::new() },
        };
        let mut rejects: Vec<RejectSummary> = note("fires", fires.rejects).collect();
        rejects.extend(note("stations", stations.rejects));
        rejects.extend(note("features", features.rejects));
        Self::from_parts(config, fires.records, stations.records, features.records, rejects)
    }

    pub fn from_parts(
        config: Config,
        fires: Vec<FireRecord>,
        stations: Vec<Station>,
        features: Vec<FeatureTable>,
        rejects: Vec<RejectSummary>,
    ) -> anyhow::Result<Self> {
        let window = match config.window {
            Some(w) => MonthWindow::new(w.start, w.end)?,
            None => MonthWindow::spanning(&fires).context("no fire records to infer the month window from")?,
        };
        let raster = rasterize(&fires, &features, &config.grid, window)?;
        let (forecast, forecast_error) = match fit(&raster.tensor, &config.forecast)
            .and_then(|m| attribute(&m, &raster.tensor).map(|a| (m, a)))
        {
            Ok(pair) => (Some(pair), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let known: std::collections::BTreeSet<&str> = stations.iter().map(|s| s.id.as_str()).collect();
        let unknown_station_fires = fires
            .iter()
            .filter(|f| !known.contains(f.station_id.as_str()))
            .map(|f| f.id.clone())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let report = LoadReport {
            fire_records: fires.len(),
            stations: stations.len(),
            feature_tables: features.iter().map(|t| t.name.clone()).collect(),
            window,
            skipped_out_of_extent: raster.skipped_out_of_extent,
            skipped_out_of_window: raster.skipped_out_of_window,
            unknown_station_fires,
            rejects,
            forecast_error,
        };
        Ok(Dataset { config, fires, stations, features, tensor: raster.tensor, forecast, report })
    }

    pub fn reach_field(&self) -> firecover_core::Result<ReachabilityField> {
        reachability_field(&self.stations, &self.config.grid, &self.config.travel)
    }
}
