//! Request handling shared by the HTTP API and the CLI.

use firecover_core::analytics::{
    response_distribution, sd_series, station_profile, station_summaries, yearly_counts, SdSeries, StationProfile,
    StationSummary, YearDistribution,
};
use firecover_core::criteria::{Criterion, CriteriaOptions, PlacementProblem, TargetArea};
use firecover_core::forecast::CellAttribution;
use firecover_core::geo::{CellIndex, GeoPoint, GridSpec};
use firecover_core::mobility::{boundary, cell_fire_stats, underserved, UnderservedReport};
use firecover_core::model::YearMonth;
use firecover_core::optimizer::{run_with_progress, GaConfig, ParetoResult};
use firecover_core::simulate::{compare, simulate_transfers, Bucketing, Comparison, SimOptions, Solution, TransferSimReport};
use firecover_core::Error;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dataset::Dataset;
use crate::error::{ServiceError, ServiceResult as Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct YearCount {
    pub year: i32,
    pub count: u64,
}

pub fn yearly(ds: &Dataset) -> Vec<YearCount> {
    yearly_counts(&ds.fires).into_iter().map(|(year, count)| YearCount { year, count }).collect()
}

pub fn distribution(ds: &Dataset) -> Vec<YearDistribution> {
    response_distribution(&ds.fires)
}

pub fn stations(ds: &Dataset, k: Option<f64>) -> Result<Vec<StationSummary>> {
    Ok(station_summaries(&ds.fires, &ds.stations, k_or_default(ds, k)?))
}

pub fn profile(ds: &Dataset, id: &str, k: Option<f64>, tod_width_hours: Option<u32>) -> Result<StationProfile> {
    Ok(station_profile(
        &ds.fires,
        &ds.stations,
        id,
        k_or_default(ds, k)?,
        tod_width_hours.unwrap_or(ds.config.defaults.tod_width_hours),
    )?)
}

fn k_or_default(ds: &Dataset, k: Option<f64>) -> Result<f64> {
    let k = k.unwrap_or(ds.config.defaults.k_minutes);
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::Invalid(format!("k must be positive, got {k}")).into());
    }
    Ok(k)
}

fn forecast_of(ds: &Dataset) -> Result<&firecover_core::forecast::AttributionFrame> {
    ds.forecast.as_ref().map(|(_, a)| a).ok_or_else(|| {
        ServiceError::Unavailable(format!(
            "forecast: {}",
            ds.report.forecast_error.as_deref().unwrap_or("not fitted")
        ))
    })
}

pub fn sd(ds: &Dataset) -> Result<SdSeries> {
    Ok(sd_series(forecast_of(ds)?, &ds.tensor)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct GridCellView {
    pub cell: CellIndex,
    /// Observed fire count in the month, when the data covers it.
    pub actual: Option<f64>,
    pub predicted: f64,
    pub expected: f64,
    /// Signed attribution per feature, in `features` order.
    pub phi: Vec<f64>,
    pub abs_phi_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct GridView {
    pub grid: GridSpec,
    pub month: YearMonth,
    pub months: Vec<YearMonth>,
    pub features: Vec<String>,
    pub cells: Vec<GridCellView>,
}

/// Per-cell predictions and attributions for one forecast month, the latest
/// one by default.
pub fn grid_view(ds: &Dataset, month: Option<YearMonth>) -> Result<GridView> {
    let frame = forecast_of(ds)?;
    let t = match month {
        Some(m) => frame.row_of(m).ok_or_else(|| Error::Invalid(format!("no forecast for month {m}")))?,
        None => frame.len().checked_sub(1).ok_or_else(|| ServiceError::Unavailable("empty forecast".into()))?,
    };
    let actual = frame.actual[t].as_ref();
    let cells = ds
        .config
        .grid
        .cells()
        .map(|cell| {
            let i = ds.config.grid.flat(cell);
            GridCellView {
                cell,
                actual: actual.map(|a| a[i]),
                predicted: frame.predicted[t][i],
                expected: frame.expected[i],
                phi: frame.phi_row(t, i).to_vec(),
                abs_phi_sum: frame.abs_phi_sum(t, i),
            }
        })
        .collect();
    Ok(GridView { grid: ds.config.grid, month: frame.months[t], months: frame.months.clone(), features: frame.features.clone(), cells })
}

/// Full per-cell attribution history of one cell.
pub fn cell_attribution(ds: &Dataset, cell: CellIndex) -> Result<CellAttribution> {
    let frame = forecast_of(ds)?;
    if !ds.config.grid.contains_index(cell) {
        let g = ds.config.grid;
        return Err(Error::OutOfBounds { row: cell.row, col: cell.col, rows: g.rows, cols: g.cols }.into());
    }
    let i = ds.config.grid.flat(cell);
    Ok(CellAttribution {
        cell,
        expected: frame.expected[i],
        predicted: frame.predicted.iter().map(|p| p[i]).collect(),
        phi: (0..frame.len()).map(|t| frame.phi_row(t, i).to_vec()).collect(),
        abs_phi_sum: (0..frame.len()).map(|t| frame.abs_phi_sum(t, i)).collect(),
    })
}

/// GeoJSON Feature of the area reachable within `k` minutes.
pub fn reachability(ds: &Dataset, k: Option<f64>) -> Result<Value> {
    let k = k_or_default(ds, k)?;
    let field = ds.reach_field()?;
    Ok(boundary(&field, k)?.to_geojson())
}

pub fn underserved_cells(ds: &Dataset, k: Option<f64>) -> Result<UnderservedReport> {
    let k = k_or_default(ds, k)?;
    let field = ds.reach_field()?;
    let (counts, avg) = cell_fire_stats(&ds.fires, &ds.config.grid);
    Ok(underserved(&field, &counts, &avg, k)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct OptimizeRequest {
    pub area: TargetArea,
    pub criteria: Vec<Criterion>,
    pub k_new: usize,
    #[serde(default)]
    pub ga_config: Option<GaConfig>,
    /// Overrides `ga_config.seed`.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub k_minutes: Option<f64>,
    #[serde(default)]
    pub include_existing: Option<bool>,
}

impl OptimizeRequest {
    pub fn ga(&self, ds: &Dataset) -> GaConfig {
        let mut cfg = self.ga_config.unwrap_or(ds.config.defaults.ga);
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg
    }

    /// Checks everything that can fail before the run starts.
    pub fn prepare(&self, ds: &Dataset) -> Result<(PlacementProblem, GaConfig)> {
        let cfg = self.ga(ds);
        cfg.validate()?;
        let problem = PlacementProblem::from_records(
            &ds.fires,
            &ds.stations,
            &self.area,
            self.criteria.clone(),
            self.k_new,
            ds.config.travel,
            criteria_options(ds, self.k_minutes, self.include_existing),
            ds.config.grid,
        )?;
        Ok((problem, cfg))
    }
}

fn criteria_options(ds: &Dataset, k_minutes: Option<f64>, include_existing: Option<bool>) -> CriteriaOptions {
    let d = ds.config.defaults.criteria_options();
    CriteriaOptions {
        k_minutes: k_minutes.unwrap_or(d.k_minutes),
        include_existing: include_existing.unwrap_or(d.include_existing),
    }
}

pub fn optimize(ds: &Dataset, req: &OptimizeRequest, progress: impl FnMut(usize, usize)) -> Result<ParetoResult> {
    let (problem, cfg) = req.prepare(ds)?;
    Ok(run_with_progress(&problem, &cfg, progress)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct EvaluateRequest {
    pub area: TargetArea,
    pub criteria: Vec<Criterion>,
    pub genome: Vec<GeoPoint>,
    #[serde(default)]
    pub k_minutes: Option<f64>,
    #[serde(default)]
    pub include_existing: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct EvaluateResponse {
    pub criteria: Vec<Criterion>,
    pub objectives: Vec<f64>,
}

pub fn evaluate(ds: &Dataset, req: &EvaluateRequest) -> Result<EvaluateResponse> {
    let problem = PlacementProblem::from_records(
        &ds.fires,
        &ds.stations,
        &req.area,
        req.criteria.clone(),
        req.genome.len(),
        ds.config.travel,
        criteria_options(ds, req.k_minutes, req.include_existing),
        ds.config.grid,
    )?;
    Ok(EvaluateResponse { criteria: req.criteria.clone(), objectives: problem.evaluate(&req.genome)? })
}

/// A solution as submitted for replay; ids default to `sol-<index>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SolutionInput {
    #[serde(default)]
    pub id: Option<String>,
    pub genome: Vec<GeoPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SimulateRequest {
    pub solutions: Vec<SolutionInput>,
    #[serde(default)]
    pub bucketing: Option<Bucketing>,
    #[serde(default)]
    pub transfer_backup: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SimulateResult {
    pub reports: Vec<TransferSimReport>,
    pub comparison: Comparison,
}

impl SimulateRequest {
    pub fn prepare(&self, ds: &Dataset) -> Result<(Vec<Solution>, SimOptions)> {
        if self.solutions.is_empty() {
            return Err(Error::Invalid("no solutions to simulate".into()).into());
        }
        let solutions: Vec<Solution> = self
            .solutions
            .iter()
            .enumerate()
            .map(|(i, s)| Solution { id: s.id.clone().unwrap_or_else(|| format!("sol-{i}")), genome: s.genome.clone() })
            .collect();
        let mut ids = std::collections::BTreeSet::new();
        if let Some(s) = solutions.iter().find(|s| !ids.insert(s.id.as_str())) {
            return Err(Error::Invalid(format!("duplicate solution id {:?}", s.id)).into());
        }
        if let Some(s) = solutions.iter().find(|s| s.genome.is_empty()) {
            return Err(Error::Invalid(format!("solution {:?} has no stations", s.id)).into());
        }
        let opts = SimOptions {
            travel: ds.config.travel,
            bucketing: self.bucketing.unwrap_or(ds.config.defaults.bucketing),
            transfer_backup: self.transfer_backup.unwrap_or(ds.config.defaults.transfer_backup),
        };
        Ok((solutions, opts))
    }
}

pub fn simulate(ds: &Dataset, req: &SimulateRequest, mut progress: impl FnMut(usize, usize)) -> Result<SimulateResult> {
    let (solutions, opts) = req.prepare(ds)?;
    let mut reports = Vec::with_capacity(solutions.len());
    for (i, s) in solutions.iter().enumerate() {
        reports.push(simulate_transfers(&ds.fires, &ds.stations, s, &opts)?);
        progress(i + 1, solutions.len());
    }
    let comparison = compare(&reports)?;
    Ok(SimulateResult { reports, comparison })
}
