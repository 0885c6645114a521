//! Coordinates, grid geometry and great-circle helpers.
//!
//! Grid math uses a local equirectangular projection anchored at the grid's
//! southwest corner: one degree of latitude is [`KM_PER_DEG_LAT`] km and one
//! degree of longitude is that value scaled by `cos(origin.lat)`. Row 0 is the
//! southernmost row, column 0 the westernmost column. Cells are half-open,
//! `[west, east) x [south, north)`.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const KM_PER_DEG_LAT: f64 = 111.32;

/// Sphere radius matching [`KM_PER_DEG_LAT`], so meridian distances agree
/// between the grid projection and [`haversine_km`].
pub const EARTH_RADIUS_KM: f64 = KM_PER_DEG_LAT * 180.0 / std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct GeoPoint {
    pub lat: f64,
    pub lng: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lng: f64) -> Result<Self> {
        let p = GeoPoint { lat, lng };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lat.is_finite() || !(-90.0..=90.0).contains(&self.lat) {
            return Err(Error::invalid(format!("latitude {} outside [-90, 90]", self.lat)));
        }
        if !self.lng.is_finite() || !(-180.0..=180.0).contains(&self.lng) {
            return Err(Error::invalid(format!("longitude {} outside [-180, 180]", self.lng)));
        }
        Ok(())
    }
}

/// Great-circle distance in kilometers.
pub fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = (b.lat - a.lat).to_radians();
    let dlng = (b.lng - a.lng).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlng / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Initial bearing from `from` to `to`, degrees clockwise from north in `[0, 360)`.
pub fn bearing_deg(from: GeoPoint, to: GeoPoint) -> f64 {
    let (lat1, lat2) = (from.lat.to_radians(), to.lat.to_radians());
    let dlng = (to.lng - from.lng).to_radians();
    let y = dlng.sin() * lat2.cos();
    let x = lat1.cos() * lat2.sin() - lat1.sin() * lat2.cos() * dlng.cos();
    let deg = y.atan2(x).to_degrees();
    let deg = deg.rem_euclid(360.0);
    if deg >= 360.0 {
        0.0
    } else {
        deg
    }
}

/// Point displaced `east_km` / `north_km` from `origin` under the local projection.
pub fn offset_km(origin: GeoPoint, east_km: f64, north_km: f64) -> GeoPoint {
    GeoPoint {
        lat: origin.lat + north_km / KM_PER_DEG_LAT,
        lng: origin.lng + east_km / km_per_deg_lng(origin.lat),
    }
}

fn km_per_deg_lng(lat: f64) -> f64 {
    KM_PER_DEG_LAT * lat.to_radians().cos()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
pub struct CellIndex {
    pub row: usize,
    pub col: usize,
}

impl CellIndex {
    pub fn new(row: usize, col: usize) -> Self {
        CellIndex { row, col }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct GridSpec {
    /// Southwest corner.
    pub origin: GeoPoint,
    pub cell_size_km: f64,
    pub rows: usize,
    pub cols: usize,
}

impl GridSpec {
    pub const DEFAULT_CELL_KM: f64 = 3.0;

    pub fn new(origin: GeoPoint, cell_size_km: f64, rows: usize, cols: usize) -> Result<Self> {
        let g = GridSpec { origin, cell_size_km, rows, cols };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        self.origin.validate()?;
        if !(self.cell_size_km.is_finite() && self.cell_size_km > 0.0) {
            return Err(Error::invalid("cell_size_km must be positive"));
        }
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::invalid("grid needs at least one row and one column"));
        }
        if self.origin.lat.abs() >= 89.0 {
            return Err(Error::invalid("grid origin too close to a pole for the local projection"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major flat index.
    pub fn flat(&self, cell: CellIndex) -> usize {
        cell.row * self.cols + cell.col
    }

    pub fn unflat(&self, idx: usize) -> CellIndex {
        CellIndex::new(idx / self.cols, idx % self.cols)
    }

    pub fn cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        (0..self.rows).flat_map(move |r| (0..self.cols).map(move |c| CellIndex::new(r, c)))
    }

    pub fn contains_index(&self, cell: CellIndex) -> bool {
        cell.row < self.rows && cell.col < self.cols
    }

    /// `(east_km, north_km)` of `p` relative to the origin.
    pub fn to_local_km(&self, p: GeoPoint) -> (f64, f64) {
        let east = (p.lng - self.origin.lng) * km_per_deg_lng(self.origin.lat);
        let north = (p.lat - self.origin.lat) * KM_PER_DEG_LAT;
        (east, north)
    }

    pub fn from_local_km(&self, east_km: f64, north_km: f64) -> GeoPoint {
        offset_km(self.origin, east_km, north_km)
    }

    /// Point at fractional grid coordinates, measured in cell widths from the origin.
    pub(crate) fn at_grid_units(&self, col_units: f64, row_units: f64) -> GeoPoint {
        self.from_local_km(col_units * self.cell_size_km, row_units * self.cell_size_km)
    }

    pub fn cell_of(&self, p: GeoPoint) -> Option<CellIndex> {
        let (east, north) = self.to_local_km(p);
        let col = (east / self.cell_size_km).floor();
        let row = (north / self.cell_size_km).floor();
        if !(row.is_finite() && col.is_finite()) || row < 0.0 || col < 0.0 {
            return None;
        }
        let (row, col) = (row as usize, col as usize);
        (row < self.rows && col < self.cols).then_some(CellIndex::new(row, col))
    }

    pub fn cell_center(&self, cell: CellIndex) -> Result<GeoPoint> {
        if !self.contains_index(cell) {
            return Err(Error::OutOfBounds { row: cell.row, col: cell.col, rows: self.rows, cols: self.cols });
        }
        Ok(self.at_grid_units(cell.col as f64 + 0.5, cell.row as f64 + 0.5))
    }

    /// Southwest and northeast corners of the full extent.
    pub fn extent(&self) -> (GeoPoint, GeoPoint) {
        (self.origin, self.at_grid_units(self.cols as f64, self.rows as f64))
    }

    /// Superset of the cells whose centers lie within `radius_km` (great-circle)
    /// of `p`.
    pub(crate) fn cells_near(&self, p: GeoPoint, radius_km: f64) -> impl Iterator<Item = CellIndex> + '_ {
        let (east, north) = self.to_local_km(p);
        // east-west km per degree varies with latitude across the grid
        let (sw, ne) = self.extent();
        let widest = sw.lat.to_radians().cos().min(ne.lat.to_radians().cos());
        let stretch = self.origin.lat.to_radians().cos() / widest;
        let pad = self.cell_size_km;
        let ew = radius_km * stretch.max(1.0) * 1.01;
        let to_range = |lo: f64, hi: f64, n: usize| -> Option<(usize, usize)> {
            let lo = ((lo - pad) / self.cell_size_km).floor().max(0.0);
            let hi = ((hi + pad) / self.cell_size_km).floor();
            (hi >= 0.0 && lo < n as f64).then(|| (lo as usize, (hi as usize).min(n - 1)))
        };
        let rows = to_range(north - radius_km * 1.01, north + radius_km * 1.01, self.rows);
        let cols = to_range(east - ew, east + ew, self.cols);
        let (r0, r1, c0, c1) = match (rows, cols) {
            (Some((r0, r1)), Some((c0, c1))) => (r0, r1 + 1, c0, c1 + 1),
            _ => (0, 0, 0, 0),
        };
        (r0..r1).flat_map(move |r| (c0..c1).map(move |c| CellIndex::new(r, c)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn origin() -> GeoPoint {
        GeoPoint::new(30.0, 120.0).unwrap()
    }

    #[test]
    fn origin_is_cell_zero() {
        let g = GridSpec::new(origin(), 3.0, 2, 2).unwrap();
        assert_eq!(g.cell_of(origin()), Some(CellIndex::new(0, 0)));
    }

    #[test]
    fn north_of_top_edge_is_absent() {
        let g = GridSpec::new(origin(), 3.0, 2, 2).unwrap();
        let p = offset_km(origin(), 1.0, 6.5);
        assert_eq!(g.cell_of(p), None);
        let west = offset_km(origin(), -0.1, 1.0);
        assert_eq!(g.cell_of(west), None);
    }

    #[test]
    fn displaced_point_lands_in_column_one() {
        let g = GridSpec::new(origin(), 3.0, 2, 2).unwrap();
        let p = offset_km(origin(), 4.0, 1.0);
        assert_eq!(g.cell_of(p), Some(CellIndex::new(0, 1)));
    }

    #[test]
    fn center_of_single_cell() {
        let g = GridSpec::new(origin(), 2.0, 1, 1).unwrap();
        let c = g.cell_center(CellIndex::new(0, 0)).unwrap();
        let (east, north) = g.to_local_km(c);
        assert_abs_diff_eq!(east, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(north, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(c.lat, 30.0 + 1.0 / 111.32, epsilon = 1e-12);
    }

    #[test]
    fn center_round_trip_on_full_size_grid() {
        let g = GridSpec::new(origin(), 3.0, 87, 50).unwrap();
        for cell in g.cells() {
            assert_eq!(g.cell_of(g.cell_center(cell).unwrap()), Some(cell));
        }
    }

    #[test]
    fn adjacent_columns_are_one_cell_apart() {
        let g = GridSpec::new(origin(), 3.0, 4, 4).unwrap();
        let a = g.to_local_km(g.cell_center(CellIndex::new(2, 1)).unwrap());
        let b = g.to_local_km(g.cell_center(CellIndex::new(2, 2)).unwrap());
        assert_abs_diff_eq!(b.0 - a.0, 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(b.1 - a.1, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn out_of_bounds_center_is_an_error() {
        let g = GridSpec::new(origin(), 3.0, 2, 2).unwrap();
        assert!(g.cell_center(CellIndex::new(2, 0)).is_err());
    }

    #[test]
    fn shared_edge_belongs_to_upper_cell() {
        let g = GridSpec::new(origin(), 3.0, 2, 2).unwrap();
        let p = g.at_grid_units(0.5, 1.0);
        assert_eq!(g.cell_of(p), Some(CellIndex::new(1, 0)));
    }

    #[test]
    fn haversine_meridian_matches_projection() {
        let a = origin();
        let b = offset_km(a, 0.0, 10.0);
        assert_abs_diff_eq!(haversine_km(a, b), 10.0, epsilon = 1e-9);
        assert_eq!(haversine_km(a, a), 0.0);
    }

    #[test]
    fn bearings_of_cardinal_directions() {
        let a = origin();
        assert_abs_diff_eq!(bearing_deg(a, offset_km(a, 0.0, 5.0)), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(bearing_deg(a, offset_km(a, 5.0, 0.0)), 90.0, epsilon = 0.05);
        assert_abs_diff_eq!(bearing_deg(a, offset_km(a, 0.0, -5.0)), 180.0, epsilon = 1e-9);
        assert_abs_diff_eq!(bearing_deg(a, offset_km(a, -5.0, 0.0)), 270.0, epsilon = 0.05);
    }

    #[test]
    fn cells_near_covers_the_disc() {
        let g = GridSpec::new(origin(), 1.0, 60, 60).unwrap();
        let p = offset_km(origin(), 31.3, 17.8);
        let near: std::collections::BTreeSet<_> = g.cells_near(p, 6.0).collect();
        for cell in g.cells() {
            if haversine_km(p, g.cell_center(cell).unwrap()) <= 6.0 {
                assert!(near.contains(&cell), "{cell:?}");
            }
        }
        assert!(near.len() < 400);
        let outside = offset_km(origin(), -50.0, -50.0);
        assert_eq!(g.cells_near(outside, 5.0).count(), 0);
    }

    #[test]
    fn rejects_invalid_inputs() {
        assert!(GeoPoint::new(91.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, -181.0).is_err());
        assert!(GridSpec::new(origin(), 0.0, 1, 1).is_err());
        assert!(GridSpec::new(origin(), 1.0, 0, 1).is_err());
    }
}
