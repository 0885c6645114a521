//! Seeded synthetic cities for demos and tests.
//!
//! Fire intensity follows population hotspots and rises in cold months.
//! Stations sit in the western part of the grid so the east is
//! deliberately underserved.

use std::f64::consts::TAU;

use chrono::{Datelike, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::criteria::Site;
use crate::error::{Error, Result};
use crate::geo::{CellIndex, GeoPoint, GridSpec};
use crate::ingest::{FeatureTable, Granularity};
use crate::mobility::{travel_time, TravelParams};
use crate::model::{default_channels, FireRecord, MonthWindow, Role, SpatioTemporalTensor, Station, YearMonth};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub origin: GeoPoint,
    pub cell_size_km: f64,
    pub rows: usize,
    pub cols: usize,
    pub start: YearMonth,
    pub months: usize,
    pub stations: usize,
    /// Mean fires per cell per month at the densest cell in a mild month.
    pub peak_rate: f64,
    /// Chance that a fire also gets a backup-role record.
    pub backup_share: f64,
    pub travel: TravelParams,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            seed: 7,
            origin: GeoPoint { lat: 30.18, lng: 120.02 },
            cell_size_km: 1.0,
            rows: 20,
            cols: 28,
            start: YearMonth { year: 2016, month: 1 },
            months: 48,
            stations: 9,
            peak_rate: 0.9,
            backup_share: 0.25,
            travel: TravelParams::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCity {
    pub grid: GridSpec,
    pub window: MonthWindow,
    pub stations: Vec<Station>,
    pub fires: Vec<FireRecord>,
    pub features: Vec<FeatureTable>,
}

/// Smooth bump in `[0, 1]` around `(row, col)` with spread `sigma` cells.
fn bump(cell: CellIndex, row: f64, col: f64, sigma: f64) -> f64 {
    let dr = cell.row as f64 + 0.5 - row;
    let dc = cell.col as f64 + 0.5 - col;
    (-(dr * dr + dc * dc) / (2.0 * sigma * sigma)).exp()
}

/// Mean monthly temperature by calendar month, coldest in January.
fn seasonal_temperature(month: u32) -> f64 {
    16.0 - 11.0 * (TAU * (month as f64 - 1.0) / 12.0).cos()
}

pub fn synthetic_city(spec: &SyntheticSpec) -> Result<SyntheticCity> {
    if spec.stations == 0 || spec.months == 0 {
        return Err(Error::invalid("need at least one station and one month"));
    }
    spec.travel.validate()?;
    let grid = GridSpec::new(spec.origin, spec.cell_size_km, spec.rows, spec.cols)?;
    let window = MonthWindow::new(spec.start, spec.start.add_months(spec.months as i64 - 1))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let unit = Normal::new(0.0, 1.0).expect("valid");

    let (rows, cols) = (spec.rows as f64, spec.cols as f64);
    let hot: Vec<f64> = grid
        .cells()
        .map(|c| {
            let a = bump(c, rows * 0.45, cols * 0.35, rows.min(cols) * 0.22);
            let b = bump(c, rows * 0.6, cols * 0.78, rows.min(cols) * 0.15);
            (0.15 + a + 0.8 * b).min(1.0)
        })
        .collect();
    let business: Vec<f64> = grid.cells().map(|c| bump(c, rows * 0.5, cols * 0.55, rows.min(cols) * 0.3)).collect();

    let mut population = FeatureTable::new("avg_population_density", Granularity::PerCellStatic);
    let mut ent_density = FeatureTable::new("avg_enterprise_density", Granularity::PerCellStatic);
    let mut ent_size = FeatureTable::new("avg_enterprise_size", Granularity::PerCellStatic);
    for (i, c) in grid.cells().enumerate() {
        population.insert(Some(c), None, (800.0 + 14_000.0 * hot[i]).round())?;
        ent_density.insert(Some(c), None, (2.0 + 60.0 * business[i] + rng.gen_range(0.0..4.0)).round())?;
        ent_size.insert(Some(c), None, (15.0 + rng.gen_range(0.0..60.0) * (0.5 + business[i])).round())?;
    }
    let mut temperature = FeatureTable::new("avg_temperature", Granularity::PerMonthGlobal);
    let mut precipitation = FeatureTable::new("precipitation_days", Granularity::PerMonthGlobal);
    let mut temps = Vec::with_capacity(spec.months);
    for m in window.months() {
        let t = ((seasonal_temperature(m.month) + unit.sample(&mut rng)) * 10.0).round() / 10.0;
        let rain = (9.0 + 5.0 * (TAU * (m.month as f64 - 6.0) / 12.0).cos() + 1.5 * unit.sample(&mut rng)).round().clamp(0.0, 28.0);
        temperature.insert(None, Some(m), t)?;
        precipitation.insert(None, Some(m), rain)?;
        temps.push(t);
    }

    // stations on a jittered lattice over the western 70% of the grid
    let per_row = (spec.stations as f64).sqrt().ceil() as usize;
    let lattice_rows = spec.stations.div_ceil(per_row);
    let stations: Vec<Station> = (0..spec.stations)
        .map(|i| {
            let (r, c) = (i / per_row, i % per_row);
            let row_u = (r as f64 + 0.5 + rng.gen_range(-0.2..0.2)) / lattice_rows as f64 * rows;
            let col_u = (c as f64 + 0.5 + rng.gen_range(-0.2..0.2)) / per_row as f64 * cols * 0.7;
            Station {
                id: format!("S{:02}", i + 1),
                location: grid.at_grid_units(col_u, row_u),
                commissioned: NaiveDate::from_ymd_opt(1985 + 3 * i as i32, 1 + (i % 12) as u32, 1).expect("valid"),
                staffing: Some(rng.gen_range(18..42)),
            }
        })
        .collect();

    let mut fires = Vec::new();
    let mut next_id = 0usize;
    for (t, m) in window.months().enumerate() {
        let cold = 1.0 + 0.03 * (20.0 - temps[t]);
        let days = m.add_months(1).first_day().signed_duration_since(m.first_day()).num_days() as u32;
        for (i, cell) in grid.cells().enumerate() {
            let lambda = spec.peak_rate * hot[i] * cold;
            let n = if lambda > 0.0 { Poisson::new(lambda).expect("positive").sample(&mut rng) as usize } else { 0 };
            for _ in 0..n {
                next_id += 1;
                let id = format!("F{next_id:06}");
                let location = grid.at_grid_units(cell.col as f64 + rng.gen::<f64>(), cell.row as f64 + rng.gen::<f64>());
                let alarm_time = m
                    .first_day()
                    .with_day(rng.gen_range(1..=days))
                    .expect("day in month")
                    .and_hms_opt(rng.gen_range(0..24), rng.gen_range(0..60), rng.gen_range(0..60))
                    .expect("valid time");
                let mut ranked: Vec<(f64, &Station)> =
                    stations.iter().map(|s| (travel_time(s.location, location, &spec.travel), s)).collect();
                ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)));
                let response = |travel: f64, extra: f64, rng: &mut ChaCha8Rng| {
                    let congestion = (0.12 * unit.sample(rng)).exp();
                    let turnout = (1.5 + 0.4 * unit.sample(rng)).max(0.5);
                    ((travel * congestion + turnout + extra) * 10.0).round() / 10.0
                };
                fires.push(FireRecord {
                    id: id.clone(),
                    location,
                    alarm_time,
                    response_time_min: response(ranked[0].0, 0.0, &mut rng),
                    station_id: ranked[0].1.id.clone(),
                    role: Role::Primary,
                });
                if ranked.len() > 1 && rng.gen::<f64>() < spec.backup_share {
                    fires.push(FireRecord {
                        id,
                        location,
                        alarm_time,
                        response_time_min: response(ranked[1].0, 1.0, &mut rng),
                        station_id: ranked[1].1.id.clone(),
                        role: Role::Backup,
                    });
                }
            }
        }
    }

    let mut features = vec![temperature, precipitation, ent_density, ent_size, population];
    features.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(SyntheticCity { grid, window, stations, fires, features })
}

/// Tensor with seasonal counts driven linearly by last month's temperature:
/// `count(t + 1) = round(level + amp * sin(2 pi (t + 1) / 12 + phase) + slope * temp(t) + noise)`,
/// clamped at 0. Temperatures vary by month and cell.
pub fn seasonal_tensor(grid: GridSpec, start: YearMonth, months: usize, seed: u64, noise_sd: f64) -> Result<SpatioTemporalTensor> {
    let stamps: Vec<YearMonth> = (0..months as i64).map(|i| start.add_months(i)).collect();
    let mut tensor = SpatioTemporalTensor::zeros(grid, default_channels(), stamps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sd.max(0.0)).map_err(|e| Error::invalid(e.to_string()))?;
    let n = grid.len();
    let phase: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..TAU)).collect();
    let level: Vec<f64> = (0..n).map(|_| rng.gen_range(4.0..8.0)).collect();
    let offset: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let temp = |t: usize, cell: usize| 15.0 + 10.0 * (TAU * t as f64 / 12.0).sin() + offset[cell];
    for t in 0..months {
        for cell in 0..n {
            tensor.plane_mut(t, 1)[cell] = temp(t, cell);
            tensor.plane_mut(t, 5)[cell] = 1000.0 + 100.0 * cell as f64;
            let driver = if t == 0 { temp(0, cell) } else { temp(t - 1, cell) };
            let v = level[cell] + 3.0 * (TAU * t as f64 / 12.0 + phase[cell]).sin() + 0.25 * driver + noise.sample(&mut rng);
            tensor.plane_mut(t, 0)[cell] = v.round().max(0.0);
        }
    }
    Ok(tensor)
}

/// A placement fixture: `n_fires` fire points concentrated in the east of a
/// 1 km grid, two western existing stations, and a rectangular target area
/// covering the middle and east.
#[derive(Debug, Clone)]
pub struct PlacementFixture {
    pub grid: GridSpec,
    pub fires: Vec<GeoPoint>,
    pub existing: Vec<Site>,
    pub area: Vec<GeoPoint>,
}

pub fn placement_fixture(seed: u64, n_fires: usize) -> PlacementFixture {
    let grid = GridSpec::new(GeoPoint { lat: 30.2, lng: 120.1 }, 1.0, 24, 24).expect("valid grid");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("valid");
    let centers: [(f64, f64); 3] = [(16.0, 14.0), (19.0, 6.0), (11.0, 9.0)];
    let fires = (0..n_fires)
        .map(|i| {
            let (cx, cy) = centers[i % centers.len()];
            let x = (cx + 2.0 * unit.sample(&mut rng)).clamp(6.5, 22.5);
            let y = (cy + 2.0 * unit.sample(&mut rng)).clamp(1.5, 22.5);
            grid.from_local_km(x, y)
        })
        .collect();
    let existing = vec![
        Site { id: "E1".into(), location: grid.from_local_km(3.0, 5.0) },
        Site { id: "E2".into(), location: grid.from_local_km(4.0, 17.0) },
    ];
    let area = [(6.0, 1.0), (23.0, 1.0), (23.0, 23.0), (6.0, 23.0)].iter().map(|&(x, y)| grid.from_local_km(x, y)).collect();
    PlacementFixture { grid, fires, existing, area }
}
