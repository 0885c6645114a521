//! Replays recorded fires against a layout with extra stations.
//!
//! A fire moves to a new station when that station's simulated travel time
//! is strictly shorter than the recorded response time.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDateTime};
use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::criteria::new_station_id;
use crate::error::{Error, Result};
use crate::geo::GeoPoint;
use crate::mobility::{travel_time, TravelParams};
use crate::model::{FireRecord, Role, Station};

/// Row id for fires whose recorded station is not in the station list.
pub const UNKNOWN_STATION: &str = "unknown";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum Bucketing {
    Month,
    #[default]
    Quarter,
    Year,
}

impl Bucketing {
    /// Sortable period number for a timestamp.
    pub fn ordinal(self, t: &NaiveDateTime) -> i64 {
        let y = i64::from(t.year());
        let m = i64::from(t.month0());
        match self {
            Bucketing::Month => y * 12 + m,
            Bucketing::Quarter => y * 4 + m / 3,
            Bucketing::Year => y,
        }
    }

    pub fn label(self, ordinal: i64) -> String {
        match self {
            Bucketing::Month => format!("{:04}-{:02}", ordinal.div_euclid(12), ordinal.rem_euclid(12) + 1),
            Bucketing::Quarter => format!("{:04}-Q{}", ordinal.div_euclid(4), ordinal.rem_euclid(4) + 1),
            Bucketing::Year => format!("{ordinal:04}"),
        }
    }
}

impl fmt::Display for Bucketing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Bucketing::Month => "month",
            Bucketing::Quarter => "quarter",
            Bucketing::Year => "year",
        })
    }
}

impl FromStr for Bucketing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "month" | "monthly" => Ok(Bucketing::Month),
            "quarter" | "quarterly" => Ok(Bucketing::Quarter),
            "year" | "yearly" => Ok(Bucketing::Year),
            other => Err(Error::invalid(format!("unknown bucketing {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct SimOptions {
    pub travel: TravelParams,
    pub bucketing: Bucketing,
    /// Also move backup-role records.
    pub transfer_backup: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { travel: TravelParams::default(), bucketing: Bucketing::Quarter, transfer_backup: false }
    }
}

/// A layout of new stations to replay against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Solution {
    pub id: String,
    pub genome: Vec<GeoPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    New,
    Existing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct FlowNode {
    pub id: String,
    pub kind: NodeKind,
    /// Absent for the unknown-station row.
    pub geo: Option<GeoPoint>,
    pub before: u64,
    pub after: u64,
    pub assigned: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct FlowEdge {
    pub from: String,
    pub to: String,
    pub weight: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct PeriodFlow {
    pub period: String,
    pub transferred: u64,
    /// Existing stations first (in station-list order, then the unknown row),
    /// then new stations by index.
    pub nodes: Vec<FlowNode>,
    /// Sorted by `(from, to)`.
    pub edges: Vec<FlowEdge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct TransferSimReport {
    pub solution_id: String,
    pub bucketing: Bucketing,
    pub transfer_backup: bool,
    /// Contiguous from the first to the last period containing a fire.
    pub periods: Vec<PeriodFlow>,
    /// All periods combined.
    pub overall: PeriodFlow,
    pub total_transferred: u64,
    /// Station ids referenced by fires but missing from the station list.
    pub unknown_station_ids: Vec<String>,
}

impl TransferSimReport {
    pub fn transferred_series(&self) -> Vec<u64> {
        self.periods.iter().map(|p| p.transferred).collect()
    }
}

/// Index of the new station reached first, ties to the lowest index.
fn fastest(fire: GeoPoint, genome: &[GeoPoint], p: &TravelParams) -> (usize, f64) {
    genome
        .iter()
        .enumerate()
        .map(|(i, &s)| (i, travel_time(s, fire, p)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

struct Tally {
    before: Vec<u64>,
    moved: Vec<Vec<u64>>,
}

impl Tally {
    fn new(rows: usize, k: usize) -> Self {
        Tally { before: vec![0; rows], moved: vec![vec![0; k]; rows] }
    }

    fn flow(&self, period: String, row_ids: &[String], row_geo: &[Option<GeoPoint>], genome: &[GeoPoint]) -> PeriodFlow {
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        for (r, id) in row_ids.iter().enumerate() {
            let out: u64 = self.moved[r].iter().sum();
            nodes.push(FlowNode {
                id: id.clone(),
                kind: NodeKind::Existing,
                geo: row_geo[r],
                before: self.before[r],
                after: self.before[r] - out,
                assigned: 0,
            });
            for (j, &w) in self.moved[r].iter().enumerate() {
                if w > 0 {
                    edges.push(FlowEdge { from: id.clone(), to: new_station_id(j), weight: w });
                }
            }
        }
        let mut transferred = 0;
        for (j, &g) in genome.iter().enumerate() {
            let assigned: u64 = self.moved.iter().map(|m| m[j]).sum();
            transferred += assigned;
            nodes.push(FlowNode { id: new_station_id(j), kind: NodeKind::New, geo: Some(g), before: 0, after: 0, assigned });
        }
        edges.sort_by(|a, b| (&a.from, &a.to).cmp(&(&b.from, &b.to)));
        PeriodFlow { period, transferred, nodes, edges }
    }
}

pub fn simulate_transfers(
    fires: &[FireRecord],
    stations: &[Station],
    solution: &Solution,
    opts: &SimOptions,
) -> Result<TransferSimReport> {
    if solution.genome.is_empty() {
        return Err(Error::invalid("solution has no new stations"));
    }
    opts.travel.validate()?;
    for p in &solution.genome {
        p.validate()?;
    }
    let k = solution.genome.len();

    let mut row_ids: Vec<String> = stations.iter().map(|s| s.id.clone()).collect();
    let mut row_geo: Vec<Option<GeoPoint>> = stations.iter().map(|s| Some(s.location)).collect();
    let index: BTreeMap<&str, usize> = stations.iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect();
    let unknown_ids: BTreeSet<String> =
        fires.iter().filter(|f| !index.contains_key(f.station_id.as_str())).map(|f| f.station_id.clone()).collect();
    let unknown_row = row_ids.len();
    if !unknown_ids.is_empty() {
        row_ids.push(UNKNOWN_STATION.to_string());
        row_geo.push(None);
    }

    let decisions: Vec<(usize, i64, Option<usize>)> = fires
        .par_iter()
        .map(|f| {
            let row = index.get(f.station_id.as_str()).copied().unwrap_or(unknown_row);
            let period = opts.bucketing.ordinal(&f.alarm_time);
            let eligible = f.role == Role::Primary || opts.transfer_backup;
            let target = eligible
                .then(|| fastest(f.location, &solution.genome, &opts.travel))
                .filter(|&(_, t)| t < f.response_time_min)
                .map(|(j, _)| j);
            (row, period, target)
        })
        .collect();

    let rows = row_ids.len();
    let mut overall = Tally::new(rows, k);
    let mut by_period: BTreeMap<i64, Tally> = BTreeMap::new();
    for &(row, period, target) in &decisions {
        for tally in [by_period.entry(period).or_insert_with(|| Tally::new(rows, k)), &mut overall] {
            tally.before[row] += 1;
            if let Some(j) = target {
                tally.moved[row][j] += 1;
            }
        }
    }

    let periods = match (by_period.keys().next().copied(), by_period.keys().next_back().copied()) {
        (Some(lo), Some(hi)) => (lo..=hi)
            .map(|o| {
                let label = opts.bucketing.label(o);
                match by_period.get(&o) {
                    Some(t) => t.flow(label, &row_ids, &row_geo, &solution.genome),
                    None => Tally::new(rows, k).flow(label, &row_ids, &row_geo, &solution.genome),
                }
            })
            .collect(),
        _ => Vec::new(),
    };
    let overall = overall.flow("all".into(), &row_ids, &row_geo, &solution.genome);
    Ok(TransferSimReport {
        solution_id: solution.id.clone(),
        bucketing: opts.bucketing,
        transfer_backup: opts.transfer_backup,
        total_transferred: overall.transferred,
        periods,
        overall,
        unknown_station_ids: unknown_ids.into_iter().collect(),
    })
}

/// Transfer counts of several solutions aligned on a shared period axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Comparison {
    pub bucketing: Bucketing,
    pub periods: Vec<String>,
    pub solution_ids: Vec<String>,
    /// `[period][solution]`.
    pub transferred: Vec<Vec<u64>>,
    /// `[solution][period]` running totals.
    pub cumulative: Vec<Vec<u64>>,
}

pub fn compare(reports: &[TransferSimReport]) -> Result<Comparison> {
    let bucketing = reports.first().map(|r| r.bucketing).unwrap_or_default();
    if let Some(r) = reports.iter().find(|r| r.bucketing != bucketing) {
        return Err(Error::BucketingMismatch(format!(
            "solution {} uses {} while the first report uses {bucketing}",
            r.solution_id, r.bucketing
        )));
    }
    let mut order: Vec<&TransferSimReport> = reports.iter().collect();
    order.sort_by(|a, b| a.solution_id.cmp(&b.solution_id));
    let periods: Vec<String> =
        order.iter().flat_map(|r| r.periods.iter().map(|p| p.period.clone())).collect::<BTreeSet<_>>().into_iter().collect();
    let lookup: Vec<BTreeMap<&str, u64>> =
        order.iter().map(|r| r.periods.iter().map(|p| (p.period.as_str(), p.transferred)).collect()).collect();
    let transferred: Vec<Vec<u64>> = periods
        .iter()
        .map(|p| lookup.iter().map(|l| l.get(p.as_str()).copied().unwrap_or(0)).collect())
        .collect();
    let cumulative = (0..order.len())
        .map(|s| {
            transferred
                .iter()
                .scan(0u64, |acc, row| {
                    *acc += row[s];
                    Some(*acc)
                })
                .collect()
        })
        .collect();
    Ok(Comparison {
        bucketing,
        periods,
        solution_ids: order.iter().map(|r| r.solution_id.clone()).collect(),
        transferred,
        cumulative,
    })
}
