//! Travel-time model, reachability fields, k-minute boundaries and
//! underserved-cell scoring.
//!
//! Travel is straight-line great-circle distance stretched by a detour factor
//! and driven at a constant speed. Reachability is evaluated at cell centers.

use std::collections::HashMap;

use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geo::{haversine_km, CellIndex, GeoPoint, GridSpec};
use crate::model::{FireRecord, Station};

/// Default response-time threshold in minutes.
pub const DEFAULT_K_MINUTES: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct TravelParams {
    pub speed_kmh: f64,
    pub detour_factor: f64,
}

impl Default for TravelParams {
    fn default() -> Self {
        TravelParams { speed_kmh: 40.0, detour_factor: 1.4 }
    }
}

impl TravelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.speed_kmh.is_finite() && self.speed_kmh > 0.0) {
            return Err(Error::invalid("speed_kmh must be positive"));
        }
        if !(self.detour_factor.is_finite() && self.detour_factor >= 1.0) {
            return Err(Error::invalid("detour_factor must be >= 1"));
        }
        Ok(())
    }

    /// Road distance estimate in km.
    pub fn distance_km(&self, a: GeoPoint, b: GeoPoint) -> f64 {
        haversine_km(a, b) * self.detour_factor
    }

    /// Kilometres covered in `minutes`.
    pub fn reach_km(&self, minutes: f64) -> f64 {
        minutes * self.speed_kmh / 60.0
    }
}

/// Minutes to travel from `a` to `b`.
pub fn travel_time(a: GeoPoint, b: GeoPoint, p: &TravelParams) -> f64 {
    p.distance_km(a, b) / p.speed_kmh * 60.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ReachabilityField {
    pub grid: GridSpec,
    /// Row-major minutes from the nearest station to each cell center.
    pub min_time_min: Vec<f64>,
}

impl ReachabilityField {
    pub fn get(&self, cell: CellIndex) -> f64 {
        self.min_time_min[self.grid.flat(cell)]
    }

    pub fn reachable(&self, k: f64) -> Vec<bool> {
        self.min_time_min.iter().map(|&t| t <= k).collect()
    }
}

pub fn reachability_field(stations: &[Station], grid: &GridSpec, p: &TravelParams) -> Result<ReachabilityField> {
    let sites: Vec<GeoPoint> = stations.iter().map(|s| s.location).collect();
    reachability_field_from(&sites, grid, p)
}

pub fn reachability_field_from(sites: &[GeoPoint], grid: &GridSpec, p: &TravelParams) -> Result<ReachabilityField> {
    if sites.is_empty() {
        return Err(Error::NoStations);
    }
    grid.validate()?;
    p.validate()?;
    let min_time_min = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let center = grid.cell_center(grid.unflat(idx)).expect("in-bounds cell");
            sites.iter().map(|&s| travel_time(s, center, p)).fold(f64::INFINITY, f64::min)
        })
        .collect();
    Ok(ReachabilityField { grid: *grid, min_time_min })
}

/// Closed contours separating cells reachable within `k_minutes` from the rest.
///
/// Rings are closed (first point repeated last) and never cross. A cell
/// center lies inside an odd number of rings exactly when it is reachable.
/// A fully reachable grid has no rings and sets `all_reachable`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ReachBoundary {
    pub k_minutes: f64,
    pub all_reachable: bool,
    pub rings: Vec<Vec<GeoPoint>>,
}

impl ReachBoundary {
    /// Even-odd containment against the rings.
    pub fn ring_parity(&self, p: GeoPoint) -> bool {
        self.rings.iter().filter(|r| point_in_ring(p, r)).count() % 2 == 1
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        self.all_reachable || self.ring_parity(p)
    }

    /// GeoJSON Feature with a MultiPolygon geometry; rings at even nesting
    /// depth are outer boundaries (counter-clockwise) and odd-depth rings
    /// are holes (clockwise) of their innermost enclosing outer ring.
    pub fn to_geojson(&self) -> Value {
        let depth: Vec<usize> = self
            .rings
            .iter()
            .enumerate()
            .map(|(i, r)| self.rings.iter().enumerate().filter(|&(j, o)| j != i && point_in_ring(r[0], o)).count())
            .collect();
        let mut polygons: Vec<(usize, Vec<Vec<GeoPoint>>)> = Vec::new();
        let mut index_of_outer = HashMap::new();
        for (i, ring) in self.rings.iter().enumerate() {
            if depth[i].is_multiple_of(2) {
                index_of_outer.insert(i, polygons.len());
                polygons.push((i, vec![oriented(ring, true)]));
            }
        }
        for (i, ring) in self.rings.iter().enumerate() {
            if depth[i] % 2 == 1 {
                let parent = (0..self.rings.len())
                    .filter(|&j| depth[j] + 1 == depth[i] && point_in_ring(ring[0], &self.rings[j]))
                    .min()
                    .expect("a hole has an enclosing outer ring");
                polygons[index_of_outer[&parent]].1.push(oriented(ring, false));
            }
        }
        let coords: Vec<Value> = polygons
            .into_iter()
            .map(|(_, rings)| {
                Value::Array(
                    rings
                        .into_iter()
                        .map(|r| Value::Array(r.into_iter().map(|p| json!([p.lng, p.lat])).collect()))
                        .collect(),
                )
            })
            .collect();
        json!({
            "type": "Feature",
            "properties": { "k_minutes": self.k_minutes, "all_reachable": self.all_reachable },
            "geometry": { "type": "MultiPolygon", "coordinates": coords },
        })
    }
}

fn signed_area(ring: &[GeoPoint]) -> f64 {
    ring.windows(2).map(|w| w[0].lng * w[1].lat - w[1].lng * w[0].lat).sum::<f64>() / 2.0
}

fn oriented(ring: &[GeoPoint], ccw: bool) -> Vec<GeoPoint> {
    let mut r = ring.to_vec();
    if (signed_area(&r) > 0.0) != ccw {
        r.reverse();
    }
    r
}

/// Crossing-number test; `ring` is closed.
pub fn point_in_ring(p: GeoPoint, ring: &[GeoPoint]) -> bool {
    let mut inside = false;
    for w in ring.windows(2) {
        let (a, b) = (w[0], w[1]);
        if (a.lat > p.lat) != (b.lat > p.lat) {
            let x = a.lng + (p.lat - a.lat) / (b.lat - a.lat) * (b.lng - a.lng);
            if p.lng < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Vertex on the doubled padded sample lattice: `(2 * col, 2 * row)` with
/// the sample at padded index 1 being cell 0.
type HalfPoint = (i64, i64);

pub fn boundary(field: &ReachabilityField, k_minutes: f64) -> Result<ReachBoundary> {
    if !(k_minutes.is_finite() && k_minutes > 0.0) {
        return Err(Error::invalid("k must be positive"));
    }
    let grid = &field.grid;
    let mask = field.reachable(k_minutes);
    let reachable = mask.iter().filter(|&&m| m).count();
    if reachable == 0 || reachable == mask.len() {
        return Ok(ReachBoundary { k_minutes, all_reachable: reachable == mask.len(), rings: Vec::new() });
    }

    let (rows, cols) = (grid.rows as i64, grid.cols as i64);
    let sample = |r: i64, c: i64| -> bool {
        (1..=rows).contains(&r) && (1..=cols).contains(&c) && mask[((r - 1) * cols + (c - 1)) as usize]
    };

    let mut segments: Vec<(HalfPoint, HalfPoint)> = Vec::new();
    for sr in 0..=rows {
        for sc in 0..=cols {
            let corners = [sample(sr, sc), sample(sr, sc + 1), sample(sr + 1, sc + 1), sample(sr + 1, sc)];
            let bottom = (2 * sc + 1, 2 * sr);
            let right = (2 * sc + 2, 2 * sr + 1);
            let top = (2 * sc + 1, 2 * sr + 2);
            let left = (2 * sc, 2 * sr + 1);
            // corners: bl, br, tr, tl; edges: bottom (bl-br), right (br-tr), top (tr-tl), left (tl-bl)
            let edges = [bottom, right, top, left];
            let crossing: Vec<usize> = (0..4).filter(|&e| corners[e] != corners[(e + 1) % 4]).collect();
            match crossing.len() {
                0 => {}
                2 => segments.push((edges[crossing[0]], edges[crossing[1]])),
                4 => {
                    // saddle: cut off each reachable corner on its own
                    for c in (0..4).filter(|&c| corners[c]) {
                        segments.push((edges[(c + 3) % 4], edges[c]));
                    }
                }
                _ => unreachable!("a square has an even number of sign changes"),
            }
        }
    }

    let rings = chain_segments(&segments)
        .into_iter()
        .map(|ring| {
            simplify_collinear(&ring)
                .into_iter()
                .map(|(hx, hy)| grid.at_grid_units((hx as f64 - 1.0) * 0.5, (hy as f64 - 1.0) * 0.5))
                .collect()
        })
        .collect();
    Ok(ReachBoundary { k_minutes, all_reachable: false, rings })
}

fn chain_segments(segments: &[(HalfPoint, HalfPoint)]) -> Vec<Vec<HalfPoint>> {
    let mut at: HashMap<HalfPoint, Vec<usize>> = HashMap::new();
    for (i, (a, b)) in segments.iter().enumerate() {
        at.entry(*a).or_default().push(i);
        at.entry(*b).or_default().push(i);
    }
    let mut used = vec![false; segments.len()];
    let mut rings = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (first, mut cur) = segments[start];
        let mut ring = vec![first, cur];
        while cur != first {
            let next = at[&cur].iter().copied().find(|&s| !used[s]).expect("contours are closed");
            used[next] = true;
            let (a, b) = segments[next];
            cur = if a == cur { b } else { a };
            ring.push(cur);
        }
        rings.push(ring);
    }
    rings.sort();
    rings
}

fn simplify_collinear(ring: &[HalfPoint]) -> Vec<HalfPoint> {
    // ring is closed; drop interior vertices lying on a straight run
    let open = &ring[..ring.len() - 1];
    let n = open.len();
    let mut out: Vec<HalfPoint> = (0..n)
        .filter(|&i| {
            let (p, c, q) = (open[(i + n - 1) % n], open[i], open[(i + 1) % n]);
            (c.0 - p.0) * (q.1 - c.1) - (c.1 - p.1) * (q.0 - c.0) != 0
        })
        .map(|i| open[i])
        .collect();
    out.push(out[0]);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct UnderservedCell {
    pub cell: CellIndex,
    pub min_time_min: f64,
    pub fire_count: f64,
    pub avg_response_min: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct UnderservedReport {
    pub k_minutes: f64,
    /// Sorted by score descending, then cell index.
    pub cells: Vec<UnderservedCell>,
}

/// Per-cell fire count and mean recorded response time; cells without fires
/// report a mean of 0.
pub fn cell_fire_stats(fires: &[FireRecord], grid: &GridSpec) -> (Vec<f64>, Vec<f64>) {
    let mut counts = vec![0.0; grid.len()];
    let mut sums = vec![0.0; grid.len()];
    for f in fires {
        if let Some(c) = grid.cell_of(f.location) {
            let i = grid.flat(c);
            counts[i] += 1.0;
            sums[i] += f.response_time_min;
        }
    }
    let avg = counts.iter().zip(&sums).map(|(&n, &s)| if n > 0.0 { s / n } else { 0.0 }).collect();
    (counts, avg)
}

/// Ranks cells slower than `k_minutes` by an equal blend of min-max
/// normalized fire count and mean response time among those cells.
pub fn underserved(
    field: &ReachabilityField,
    fire_counts: &[f64],
    avg_response: &[f64],
    k_minutes: f64,
) -> Result<UnderservedReport> {
    let n = field.min_time_min.len();
    if fire_counts.len() != n || avg_response.len() != n {
        return Err(Error::ShapeMismatch("per-cell inputs must match the field's grid".into()));
    }
    let candidates: Vec<usize> = (0..n).filter(|&i| field.min_time_min[i] > k_minutes).collect();
    let norm = |vals: &[f64]| -> Vec<f64> {
        let pick: Vec<f64> = candidates.iter().map(|&i| vals[i]).collect();
        let lo = pick.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = pick.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        pick.iter().map(|&v| if hi > lo { (v - lo) / (hi - lo) } else { 1.0 }).collect()
    };
    let nc = norm(fire_counts);
    let nr = norm(avg_response);
    let mut cells: Vec<UnderservedCell> = candidates
        .iter()
        .enumerate()
        .map(|(j, &i)| UnderservedCell {
            cell: field.grid.unflat(i),
            min_time_min: field.min_time_min[i],
            fire_count: fire_counts[i],
            avg_response_min: avg_response[i],
            score: 0.5 * nc[j] + 0.5 * nr[j],
        })
        .collect();
    cells.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.cell.cmp(&b.cell)));
    Ok(UnderservedReport { k_minutes, cells })
}
