//! Placement criteria for additional stations.
//!
//! Fires are served by the nearest station (by travel time) among the
//! existing stations and the candidate new ones; ties go to the
//! lexicographically smallest station id. Service overlap compares the sets
//! of grid cells each side reaches within `k` minutes.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{CellIndex, GeoPoint, GridSpec};
use crate::mobility::{point_in_ring, travel_time, TravelParams, DEFAULT_K_MINUTES};
use crate::model::{FireRecord, Station};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
pub enum Criterion {
    /// Average response time.
    #[serde(rename = "ART")]
    Art,
    /// Maximum response time.
    #[serde(rename = "MRT")]
    Mrt,
    /// Average travel distance.
    #[serde(rename = "ATD")]
    Atd,
    /// Maximum travel distance.
    #[serde(rename = "MTD")]
    Mtd,
    /// Service overlap with existing stations.
    #[serde(rename = "SO")]
    So,
}

impl Criterion {
    pub const ALL: [Criterion; 5] = [Criterion::Art, Criterion::Mrt, Criterion::Atd, Criterion::Mtd, Criterion::So];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::Art => "ART",
            Criterion::Mrt => "MRT",
            Criterion::Atd => "ATD",
            Criterion::Mtd => "MTD",
            Criterion::So => "SO",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Criterion::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid(format!("unknown criterion {s:?}")))
    }
}

/// Decision space for new stations: a simple polygon or a set of grid cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TargetArea {
    Polygon { vertices: Vec<GeoPoint> },
    Cells { cells: Vec<CellIndex> },
}

impl TargetArea {
    pub fn resolve(&self, grid: &GridSpec) -> Result<Region> {
        match self {
            TargetArea::Polygon { vertices } => Region::polygon(vertices),
            TargetArea::Cells { cells } => Region::cells(grid, cells),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct BoundingBox {
    pub south: f64,
    pub west: f64,
    pub north: f64,
    pub east: f64,
}

impl BoundingBox {
    fn of(points: impl IntoIterator<Item = GeoPoint>) -> Self {
        points.into_iter().fold(
            BoundingBox { south: f64::INFINITY, west: f64::INFINITY, north: f64::NEG_INFINITY, east: f64::NEG_INFINITY },
            |b, p| BoundingBox {
                south: b.south.min(p.lat),
                west: b.west.min(p.lng),
                north: b.north.max(p.lat),
                east: b.east.max(p.lng),
            },
        )
    }

    pub fn clamp(&self, p: GeoPoint) -> GeoPoint {
        GeoPoint { lat: p.lat.clamp(self.south, self.north), lng: p.lng.clamp(self.west, self.east) }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    /// Closed ring.
    Polygon(Vec<GeoPoint>),
    Cells { grid: GridSpec, cells: BTreeSet<CellIndex> },
}

/// A validated target area with the geometry the optimizer needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    shape: Shape,
    bbox: BoundingBox,
    anchor: GeoPoint,
}

impl Region {
    pub fn polygon(vertices: &[GeoPoint]) -> Result<Self> {
        let mut ring: Vec<GeoPoint> = vertices.to_vec();
        for p in &ring {
            p.validate()?;
        }
        if ring.len() >= 2 && ring.first() == ring.last() {
            ring.pop();
        }
        if ring.len() < 3 {
            return Err(Error::invalid("polygon needs at least 3 distinct vertices"));
        }
        if !is_simple(&ring) {
            return Err(Error::invalid("polygon must be simple (no self-intersections)"));
        }
        ring.push(ring[0]);
        let area = ring.windows(2).map(|w| w[0].lng * w[1].lat - w[1].lng * w[0].lat).sum::<f64>();
        if area == 0.0 {
            return Err(Error::invalid("polygon has zero area"));
        }
        let bbox = BoundingBox::of(ring.iter().copied());
        let anchor = interior_point(&ring, &bbox);
        Ok(Region { shape: Shape::Polygon(ring), bbox, anchor })
    }

    pub fn cells(grid: &GridSpec, cells: &[CellIndex]) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::invalid("target cell set is empty"));
        }
        if let Some(c) = cells.iter().find(|c| !grid.contains_index(**c)) {
            return Err(Error::OutOfBounds { row: c.row, col: c.col, rows: grid.rows, cols: grid.cols });
        }
        let set: BTreeSet<CellIndex> = cells.iter().copied().collect();
        let corners = set.iter().flat_map(|c| {
            [
                grid.at_grid_units(c.col as f64, c.row as f64),
                grid.at_grid_units(c.col as f64 + 1.0, c.row as f64 + 1.0),
            ]
        });
        let bbox = BoundingBox::of(corners);
        // the cell center closest to the mean of all centers
        let centers: Vec<GeoPoint> = set.iter().map(|&c| grid.cell_center(c).expect("checked")).collect();
        let n = centers.len() as f64;
        let mean = GeoPoint {
            lat: centers.iter().map(|p| p.lat).sum::<f64>() / n,
            lng: centers.iter().map(|p| p.lng).sum::<f64>() / n,
        };
        let anchor = *centers
            .iter()
            .min_by(|a, b| sq_deg(**a, mean).total_cmp(&sq_deg(**b, mean)))
            .expect("non-empty");
        Ok(Region { shape: Shape::Cells { grid: *grid, cells: set }, bbox, anchor })
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        match &self.shape {
            Shape::Polygon(ring) => point_in_ring(p, ring),
            Shape::Cells { grid, cells } => grid.cell_of(p).is_some_and(|c| cells.contains(&c)),
        }
    }

    pub fn bbox(&self) -> BoundingBox {
        self.bbox
    }

    /// A point guaranteed to lie inside the region.
    pub fn anchor(&self) -> GeoPoint {
        self.anchor
    }

    /// Area centroid for polygons, mean cell center for cell sets. May fall
    /// outside a non-convex region.
    pub fn centroid(&self) -> GeoPoint {
        match &self.shape {
            Shape::Polygon(ring) => polygon_centroid(ring),
            Shape::Cells { grid, cells } => {
                let n = cells.len() as f64;
                let pts = cells.iter().map(|&c| grid.cell_center(c).expect("in bounds"));
                let (lat, lng) = pts.fold((0.0, 0.0), |(a, b), p| (a + p.lat, b + p.lng));
                GeoPoint { lat: lat / n, lng: lng / n }
            }
        }
    }
}

fn sq_deg(a: GeoPoint, b: GeoPoint) -> f64 {
    (a.lat - b.lat).powi(2) + (a.lng - b.lng).powi(2)
}

fn polygon_centroid(ring: &[GeoPoint]) -> GeoPoint {
    let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for w in ring.windows(2) {
        let cross = w[0].lng * w[1].lat - w[1].lng * w[0].lat;
        a += cross;
        cx += (w[0].lng + w[1].lng) * cross;
        cy += (w[0].lat + w[1].lat) * cross;
    }
    GeoPoint { lat: cy / (3.0 * a), lng: cx / (3.0 * a) }
}

/// Centroid when inside, otherwise the midpoint of the widest inside span
/// of the horizontal line through the bbox middle (falling back to other
/// scan lines).
fn interior_point(ring: &[GeoPoint], bbox: &BoundingBox) -> GeoPoint {
    let c = polygon_centroid(ring);
    if point_in_ring(c, ring) {
        return c;
    }
    for frac in [0.5, 0.25, 0.75, 0.125, 0.375, 0.625, 0.875] {
        let lat = bbox.south + (bbox.north - bbox.south) * frac;
        let mut xs: Vec<f64> = ring
            .windows(2)
            .filter(|w| (w[0].lat > lat) != (w[1].lat > lat))
            .map(|w| w[0].lng + (lat - w[0].lat) / (w[1].lat - w[0].lat) * (w[1].lng - w[0].lng))
            .collect();
        xs.sort_by(f64::total_cmp);
        if let Some(span) = xs.chunks_exact(2).max_by(|a, b| (a[1] - a[0]).total_cmp(&(b[1] - b[0]))) {
            let p = GeoPoint { lat, lng: (span[0] + span[1]) / 2.0 };
            if point_in_ring(p, ring) {
                return p;
            }
        }
    }
    ring[0]
}

fn is_simple(open: &[GeoPoint]) -> bool {
    let n = open.len();
    let edge = |i: usize| (open[i], open[(i + 1) % n]);
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            let (a, b) = edge(i);
            let (c, d) = edge(j);
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

fn orient(a: GeoPoint, b: GeoPoint, c: GeoPoint) -> f64 {
    (b.lng - a.lng) * (c.lat - a.lat) - (b.lat - a.lat) * (c.lng - a.lng)
}

fn segments_intersect(a: GeoPoint, b: GeoPoint, c: GeoPoint, d: GeoPoint) -> bool {
    let on = |p: GeoPoint, q: GeoPoint, r: GeoPoint| {
        q.lng.min(p.lng) <= r.lng && r.lng <= q.lng.max(p.lng) && q.lat.min(p.lat) <= r.lat && r.lat <= q.lat.max(p.lat)
    };
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0)) && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0)) {
        return true;
    }
    (o1 == 0.0 && on(a, b, c)) || (o2 == 0.0 && on(a, b, d)) || (o3 == 0.0 && on(c, d, a)) || (o4 == 0.0 && on(c, d, b))
}

/// A station location with an id, existing or hypothetical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Site {
    pub id: String,
    pub location: GeoPoint,
}

impl From<&Station> for Site {
    fn from(s: &Station) -> Self {
        Site { id: s.id.clone(), location: s.location }
    }
}

/// Id given to the `index`-th candidate station.
pub fn new_station_id(index: usize) -> String {
    format!("new-{index}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Response {
    pub station_id: String,
    pub minutes: f64,
    pub km: f64,
}

/// Nearest site by travel time; ties go to the smallest id.
pub fn responder(fire: GeoPoint, sites: &[Site], p: &TravelParams) -> Result<Response> {
    let best = sites
        .iter()
        .map(|s| (travel_time(s.location, fire, p), s))
        .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)))
        .ok_or(Error::NoStations)?;
    Ok(Response { station_id: best.1.id.clone(), minutes: best.0, km: p.distance_km(best.1.location, fire) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct CriteriaOptions {
    pub k_minutes: f64,
    /// When false, only the new stations respond in ART/MRT/ATD/MTD.
    pub include_existing: bool,
}

impl Default for CriteriaOptions {
    fn default() -> Self {
        CriteriaOptions { k_minutes: DEFAULT_K_MINUTES, include_existing: true }
    }
}

/// Everything needed to score a set of new station locations.
#[derive(Debug, Clone)]
pub struct PlacementProblem {
    pub region: Region,
    pub criteria: Vec<Criterion>,
    pub k_new: usize,
    pub travel: TravelParams,
    pub options: CriteriaOptions,
    pub grid: GridSpec,
    /// Fires inside the region.
    pub fires: Vec<GeoPoint>,
    pub existing: Vec<Site>,
    /// Per fire, `(minutes, km)` to the nearest existing station.
    existing_best: Vec<Option<(f64, f64)>>,
    /// Grid cells an existing station reaches within `k_minutes`.
    existing_reach: Vec<bool>,
}

impl PlacementProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fires: &[GeoPoint],
        existing: &[Site],
        region: Region,
        criteria: Vec<Criterion>,
        k_new: usize,
        travel: TravelParams,
        options: CriteriaOptions,
        grid: GridSpec,
    ) -> Result<Self> {
        travel.validate()?;
        grid.validate()?;
        if k_new == 0 {
            return Err(Error::invalid("k_new must be at least 1"));
        }
        if criteria.is_empty() {
            return Err(Error::invalid("select at least one criterion"));
        }
        let mut seen = BTreeSet::new();
        if !criteria.iter().all(|c| seen.insert(*c)) {
            return Err(Error::invalid("duplicate criterion"));
        }
        if !(options.k_minutes.is_finite() && options.k_minutes > 0.0) {
            return Err(Error::invalid("k must be positive"));
        }
        let fires: Vec<GeoPoint> = fires.iter().copied().filter(|&f| region.contains(f)).collect();
        if fires.is_empty() {
            return Err(Error::NoFires);
        }
        let existing_best = fires
            .iter()
            .map(|&f| {
                existing
                    .iter()
                    .map(|s| (travel_time(s.location, f, &travel), travel.distance_km(s.location, f)))
                    .min_by(|a, b| a.0.total_cmp(&b.0))
            })
            .collect();
        let mut existing_reach = vec![false; grid.len()];
        let radius = travel.reach_km(options.k_minutes) / travel.detour_factor;
        for s in existing {
            mark_reach(&grid, s.location, radius, options.k_minutes, &travel, &mut existing_reach);
        }
        Ok(PlacementProblem {
            region,
            criteria,
            k_new,
            travel,
            options,
            grid,
            fires,
            existing: existing.to_vec(),
            existing_best,
            existing_reach,
        })
    }

    /// Builds the problem from ingested records, counting each fire id once.
    #[allow(clippy::too_many_arguments)]
    pub fn from_records(
        fires: &[FireRecord],
        stations: &[Station],
        area: &TargetArea,
        criteria: Vec<Criterion>,
        k_new: usize,
        travel: TravelParams,
        options: CriteriaOptions,
        grid: GridSpec,
    ) -> Result<Self> {
        let region = area.resolve(&grid)?;
        // one point per fire, not per responding-station record
        let mut seen = BTreeSet::new();
        let points: Vec<GeoPoint> =
            fires.iter().filter(|f| seen.insert(f.id.as_str())).map(|f| f.location).collect();
        let sites: Vec<Site> = stations.iter().map(Site::from).collect();
        Self::new(&points, &sites, region, criteria, k_new, travel, options, grid)
    }

    /// Objective values for `candidates`, in `self.criteria` order.
    pub fn evaluate(&self, candidates: &[GeoPoint]) -> Result<Vec<f64>> {
        if candidates.len() != self.k_new {
            return Err(Error::invalid(format!("expected {} candidate stations, got {}", self.k_new, candidates.len())));
        }
        for (index, p) in candidates.iter().enumerate() {
            if !self.region.contains(*p) {
                return Err(Error::OutsideArea { index, lat: p.lat, lng: p.lng });
            }
        }

        let needs_travel = self.criteria.iter().any(|c| *c != Criterion::So);
        let (mut sum_t, mut max_t, mut sum_d, mut max_d) = (0.0, 0.0_f64, 0.0, 0.0_f64);
        if needs_travel {
            for (i, &fire) in self.fires.iter().enumerate() {
                let mut best = candidates
                    .iter()
                    .map(|&c| (travel_time(c, fire, &self.travel), self.travel.distance_km(c, fire)))
                    .min_by(|a, b| a.0.total_cmp(&b.0))
                    .expect("k_new >= 1");
                if self.options.include_existing {
                    if let Some(e) = self.existing_best[i] {
                        if e.0 < best.0 {
                            best = e;
                        }
                    }
                }
                sum_t += best.0;
                sum_d += best.1;
                max_t = max_t.max(best.0);
                max_d = max_d.max(best.1);
            }
        }
        let n = self.fires.len() as f64;
        Ok(self
            .criteria
            .iter()
            .map(|c| match c {
                Criterion::Art => sum_t / n,
                Criterion::Mrt => max_t,
                Criterion::Atd => sum_d / n,
                Criterion::Mtd => max_d,
                Criterion::So => self.service_overlap(candidates),
            })
            .collect())
    }

    /// Share of the cells reached within `k` by the new stations that an
    /// existing station also reaches within `k`; 0 when the new stations
    /// reach no cell center.
    pub fn service_overlap(&self, candidates: &[GeoPoint]) -> f64 {
        let mut reach = vec![false; self.grid.len()];
        let radius = self.travel.reach_km(self.options.k_minutes) / self.travel.detour_factor;
        for &c in candidates {
            mark_reach(&self.grid, c, radius, self.options.k_minutes, &self.travel, &mut reach);
        }
        let total = reach.iter().filter(|&&r| r).count();
        if total == 0 {
            return 0.0;
        }
        let shared = reach.iter().zip(&self.existing_reach).filter(|(a, b)| **a && **b).count();
        shared as f64 / total as f64
    }

    pub fn existing_reach(&self) -> &[bool] {
        &self.existing_reach
    }
}

fn mark_reach(grid: &GridSpec, site: GeoPoint, radius_km: f64, k: f64, p: &TravelParams, out: &mut [bool]) {
    for cell in grid.cells_near(site, radius_km) {
        let idx = grid.flat(cell);
        if !out[idx] && travel_time(site, grid.cell_center(cell).expect("in bounds"), p) <= k {
            out[idx] = true;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::offset_km;
    use crate::mobility::reachability_field_from;
    use proptest::prelude::*;

    fn grid() -> GridSpec {
        GridSpec::new(GeoPoint::new(30.0, 120.0).unwrap(), 1.0, 40, 40).unwrap()
    }

    fn at(e: f64, n: f64) -> GeoPoint {
        offset_km(grid().origin, e, n)
    }

    fn square(lo: f64, hi: f64) -> TargetArea {
        TargetArea::Polygon { vertices: vec![at(lo, lo), at(hi, lo), at(hi, hi), at(lo, hi)] }
    }

    fn site(id: &str, p: GeoPoint) -> Site {
        Site { id: id.into(), location: p }
    }

    fn problem(fires: &[GeoPoint], existing: &[Site], criteria: Vec<Criterion>, k_new: usize) -> PlacementProblem {
        PlacementProblem::new(
            fires,
            existing,
            square(0.5, 39.5).resolve(&grid()).unwrap(),
            criteria,
            k_new,
            TravelParams::default(),
            CriteriaOptions::default(),
            grid(),
        )
        .unwrap()
    }

    #[test]
    fn responder_rules() {
        let p = TravelParams::default();
        let fire = at(20.0, 20.0);
        let one = responder(fire, &[site("Z", at(25.0, 20.0))], &p).unwrap();
        assert_eq!(one.station_id, "Z");

        let two = responder(fire, &[site("far", at(20.0, 25.0)), site("near", at(20.0, 22.0))], &p).unwrap();
        assert_eq!(two.station_id, "near");
        assert!((two.km - 2.0 * 1.4).abs() < 1e-9);
        assert!((two.minutes - 2.0 * 1.4 / 40.0 * 60.0).abs() < 1e-9);

        let tie = responder(fire, &[site("B", at(20.0, 23.0)), site("A", at(20.0, 23.0))], &p).unwrap();
        assert_eq!(tie.station_id, "A");
        assert!(responder(fire, &[], &p).is_err());
    }

    #[test]
    fn single_fire_single_station() {
        let fire = at(20.0, 20.0);
        let pb = problem(&[fire], &[], Criterion::ALL.to_vec(), 1);
        let v = pb.evaluate(&[at(20.0, 30.0)]).unwrap();
        assert!((v[0] - 21.0).abs() < 1e-9);
        assert!((v[1] - 21.0).abs() < 1e-9);
        assert!((v[2] - 14.0).abs() < 1e-9);
        assert!((v[3] - 14.0).abs() < 1e-9);
        assert_eq!(v[4], 0.0);
    }

    #[test]
    fn two_fires_mean_and_max() {
        // 7 min = 10/3 km straight line, 21 min = 10 km
        let st = at(20.0, 20.0);
        let fires = [at(20.0, 20.0 + 10.0 / 3.0), at(20.0, 10.0)];
        let pb = problem(&fires, &[], vec![Criterion::Art, Criterion::Mrt], 1);
        let v = pb.evaluate(&[st]).unwrap();
        assert!((v[0] - 14.0).abs() < 1e-9, "{v:?}");
        assert!((v[1] - 21.0).abs() < 1e-9);
    }

    #[test]
    fn co_located_station_overlaps_fully() {
        let st = at(12.3, 17.7);
        let pb = problem(&[at(20.0, 20.0)], &[site("E", st)], vec![Criterion::So], 1);
        assert_eq!(pb.evaluate(&[st]).unwrap(), vec![1.0]);
    }

    #[test]
    fn distant_station_has_no_overlap() {
        let pb = problem(&[at(20.0, 20.0)], &[site("E", at(3.0, 3.0))], vec![Criterion::So], 1);
        assert_eq!(pb.evaluate(&[at(35.0, 35.0)]).unwrap(), vec![0.0]);
    }

    #[test]
    fn overlap_matches_full_fields() {
        let e = at(10.0, 10.0);
        let n = at(14.0, 12.0);
        let pb = problem(&[at(20.0, 20.0)], &[site("E", e)], vec![Criterion::So], 1);
        let travel = TravelParams::default();
        let fe = reachability_field_from(&[e], &grid(), &travel).unwrap().reachable(9.0);
        let fnew = reachability_field_from(&[n], &grid(), &travel).unwrap().reachable(9.0);
        let total = fnew.iter().filter(|&&b| b).count() as f64;
        let shared = fnew.iter().zip(&fe).filter(|(a, b)| **a && **b).count() as f64;
        assert_eq!(pb.existing_reach(), fe.as_slice());
        assert_eq!(pb.evaluate(&[n]).unwrap(), vec![shared / total]);
    }

    #[test]
    fn rejects_bad_candidates() {
        let pb = problem(&[at(20.0, 20.0)], &[], vec![Criterion::Art], 1);
        assert!(matches!(pb.evaluate(&[at(45.0, 20.0)]), Err(Error::OutsideArea { index: 0, .. })));
        assert!(pb.evaluate(&[at(5.0, 5.0), at(6.0, 6.0)]).is_err());
    }

    #[test]
    fn no_fires_in_area() {
        let region = square(0.5, 5.0).resolve(&grid()).unwrap();
        let r = PlacementProblem::new(
            &[at(20.0, 20.0)],
            &[],
            region,
            vec![Criterion::Art],
            1,
            TravelParams::default(),
            CriteriaOptions::default(),
            grid(),
        );
        assert!(matches!(r, Err(Error::NoFires)));
    }

    #[test]
    fn existing_only_switch() {
        let fire = at(20.0, 20.0);
        let existing = [site("E", at(20.0, 21.0))];
        let region = square(0.5, 39.5).resolve(&grid()).unwrap();
        let opts = CriteriaOptions { include_existing: false, ..Default::default() };
        let pb = PlacementProblem::new(&[fire], &existing, region, vec![Criterion::Atd], 1, TravelParams::default(), opts, grid())
            .unwrap();
        let v = pb.evaluate(&[at(20.0, 30.0)]).unwrap();
        assert!((v[0] - 14.0).abs() < 1e-9);
    }

    #[test]
    fn polygon_validation() {
        let bowtie = [at(0.0, 0.0), at(5.0, 5.0), at(5.0, 0.0), at(0.0, 5.0)];
        assert!(Region::polygon(&bowtie).is_err());
        assert!(Region::polygon(&[at(0.0, 0.0), at(1.0, 1.0)]).is_err());
        let closed = [at(0.0, 0.0), at(5.0, 0.0), at(5.0, 5.0), at(0.0, 0.0)];
        assert!(Region::polygon(&closed).is_ok());
    }

    #[test]
    fn concave_anchor_is_inside() {
        // U shape whose centroid falls in the notch
        let u = [at(0.0, 0.0), at(9.0, 0.0), at(9.0, 9.0), at(6.0, 9.0), at(6.0, 2.0), at(3.0, 2.0), at(3.0, 9.0), at(0.0, 9.0)];
        let r = Region::polygon(&u).unwrap();
        assert!(r.contains(r.anchor()));
    }

    #[test]
    fn cell_regions() {
        let g = grid();
        let r = TargetArea::Cells { cells: vec![CellIndex::new(3, 4), CellIndex::new(3, 5)] }.resolve(&g).unwrap();
        assert!(r.contains(g.cell_center(CellIndex::new(3, 5)).unwrap()));
        assert!(!r.contains(g.cell_center(CellIndex::new(4, 5)).unwrap()));
        assert!(r.contains(r.anchor()));
        assert!(TargetArea::Cells { cells: vec![] }.resolve(&g).is_err());
        assert!(TargetArea::Cells { cells: vec![CellIndex::new(40, 0)] }.resolve(&g).is_err());
    }

    #[test]
    fn criterion_names() {
        assert_eq!("art".parse::<Criterion>().unwrap(), Criterion::Art);
        assert_eq!(serde_json::to_string(&Criterion::So).unwrap(), "\"SO\"");
        assert!("speed".parse::<Criterion>().is_err());
    }

    fn coords() -> impl Strategy<Value = (f64, f64)> {
        (1.0..39.0f64, 1.0..39.0f64)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn averages_bounded_by_maxima_and_permutation_invariant(
            fires in prop::collection::vec(coords(), 1..25),
            existing in prop::collection::vec(coords(), 0..4),
            cands in prop::collection::vec(coords(), 2),
        ) {
            let f: Vec<_> = fires.iter().map(|&(e, n)| at(e, n)).collect();
            let ex: Vec<_> = existing.iter().enumerate().map(|(i, &(e, n))| site(&format!("E{i}"), at(e, n))).collect();
            let c: Vec<_> = cands.iter().map(|&(e, n)| at(e, n)).collect();
            let pb = problem(&f, &ex, Criterion::ALL.to_vec(), 2);
            let v = pb.evaluate(&c).unwrap();
            prop_assert!(v[0] <= v[1] + 1e-12);
            prop_assert!(v[2] <= v[3] + 1e-12);
            prop_assert!((0.0..=1.0).contains(&v[4]));

            let mut f2 = f.clone();
            f2.reverse();
            let pb2 = problem(&f2, &ex, Criterion::ALL.to_vec(), 2);
            let mut c2 = c.clone();
            c2.reverse();
            let v2 = pb2.evaluate(&c2).unwrap();
            for (a, b) in v.iter().zip(&v2) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }

        #[test]
        fn adding_a_station_never_hurts(
            fires in prop::collection::vec(coords(), 1..20),
            existing in prop::collection::vec(coords(), 0..3),
            cands in prop::collection::vec(coords(), 2),
        ) {
            let f: Vec<_> = fires.iter().map(|&(e, n)| at(e, n)).collect();
            let ex: Vec<_> = existing.iter().enumerate().map(|(i, &(e, n))| site(&format!("E{i}"), at(e, n))).collect();
            let crit = vec![Criterion::Art, Criterion::Mrt, Criterion::Atd, Criterion::Mtd];
            let one = problem(&f, &ex, crit.clone(), 1).evaluate(&[at(cands[0].0, cands[0].1)]).unwrap();
            let two = problem(&f, &ex, crit, 2)
                .evaluate(&[at(cands[0].0, cands[0].1), at(cands[1].0, cands[1].1)])
                .unwrap();
            for (a, b) in one.iter().zip(&two) {
                prop_assert!(b <= a);
            }
        }
    }
}
