//! Descriptive aggregations over the incident history.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Datelike, Timelike};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::AttributionFrame;
use crate::geo::{bearing_deg, GeoPoint};
use crate::model::{FireRecord, Role, SpatioTemporalTensor, Station, YearMonth, FIRE_COUNT};

pub const COMPASS_SECTORS: usize = 6;
pub const DEFAULT_TOD_WIDTH_HOURS: u32 = 4;

/// Distinct fire ids per alarm year.
pub fn yearly_counts(fires: &[FireRecord]) -> BTreeMap<i32, u64> {
    let mut seen: BTreeMap<i32, BTreeSet<&str>> = BTreeMap::new();
    for f in fires {
        seen.entry(f.alarm_time.year()).or_default().insert(f.id.as_str());
    }
    seen.into_iter().map(|(y, ids)| (y, ids.len() as u64)).collect()
}

/// Linear interpolation at position `p * (n - 1)` of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub count: usize,
}

impl FiveNumber {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(FiveNumber {
            min: v[0],
            q1: quantile_sorted(&v, 0.25),
            median: quantile_sorted(&v, 0.5),
            q3: quantile_sorted(&v, 0.75),
            max: v[v.len() - 1],
            count: v.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct YearDistribution {
    pub year: i32,
    #[serde(flatten)]
    pub stats: FiveNumber,
}

/// Response-time five-number summary per alarm year over primary-role
/// records.
pub fn response_distribution(fires: &[FireRecord]) -> Vec<YearDistribution> {
    let mut by_year: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
    for f in fires.iter().filter(|f| f.role == Role::Primary) {
        by_year.entry(f.alarm_time.year()).or_default().push(f.response_time_min);
    }
    by_year
        .into_iter()
        .map(|(year, v)| YearDistribution { year, stats: FiveNumber::of(&v).expect("non-empty") })
        .collect()
}

/// Sector 0 is centered on north, sector 1 on 60 degrees, and so on.
pub fn compass_sector(bearing: f64) -> usize {
    let width = 360.0 / COMPASS_SECTORS as f64;
    (((bearing + width / 2.0) / width).floor() as i64).rem_euclid(COMPASS_SECTORS as i64) as usize
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct ThresholdSplit {
    pub below_k: u64,
    pub at_or_above_k: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct TimeOfDayBucket {
    pub start_hour: u32,
    pub end_hour: u32,
    #[serde(flatten)]
    pub split: ThresholdSplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct StationProfile {
    pub station_id: String,
    pub location: GeoPoint,
    pub k_minutes: f64,
    pub total_actions: u64,
    pub primary: u64,
    pub backup: u64,
    /// Action counts per 60-degree sector, sector 0 centered on north.
    pub sectors: [u64; COMPASS_SECTORS],
    pub time_of_day: Vec<TimeOfDayBucket>,
}

pub fn station_profile(
    fires: &[FireRecord],
    stations: &[Station],
    station_id: &str,
    k_minutes: f64,
    tod_width_hours: u32,
) -> Result<StationProfile> {
    let station = stations
        .iter()
        .find(|s| s.id == station_id)
        .ok_or_else(|| Error::UnknownStation(station_id.to_string()))?;
    if !(k_minutes.is_finite() && k_minutes > 0.0) {
        return Err(Error::invalid("k must be positive"));
    }
    if tod_width_hours == 0 || 24 % tod_width_hours != 0 {
        return Err(Error::invalid(format!("time-of-day width must divide 24 hours, got {tod_width_hours}")));
    }
    let mut profile = StationProfile {
        station_id: station.id.clone(),
        location: station.location,
        k_minutes,
        total_actions: 0,
        primary: 0,
        backup: 0,
        sectors: [0; COMPASS_SECTORS],
        time_of_day: (0..24 / tod_width_hours)
            .map(|i| TimeOfDayBucket {
                start_hour: i * tod_width_hours,
                end_hour: (i + 1) * tod_width_hours,
                split: ThresholdSplit { below_k: 0, at_or_above_k: 0 },
            })
            .collect(),
    };
    for f in fires.iter().filter(|f| f.station_id == station_id) {
        profile.total_actions += 1;
        match f.role {
            Role::Primary => profile.primary += 1,
            Role::Backup => profile.backup += 1,
        }
        profile.sectors[compass_sector(bearing_deg(station.location, f.location))] += 1;
        let bucket = &mut profile.time_of_day[(f.alarm_time.hour() / tod_width_hours) as usize].split;
        if f.response_time_min < k_minutes {
            bucket.below_k += 1;
        } else {
            bucket.at_or_above_k += 1;
        }
    }
    Ok(profile)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct StationSummary {
    pub id: String,
    pub location: GeoPoint,
    pub commissioned: chrono::NaiveDate,
    pub staffing: Option<u32>,
    pub total_actions: u64,
    pub primary: u64,
    pub backup: u64,
    /// Mean over primary-role records; absent without any.
    pub mean_response_min: Option<f64>,
    /// Share of primary-role records answered in under `k` minutes.
    pub within_k_share: Option<f64>,
}

pub fn station_summaries(fires: &[FireRecord], stations: &[Station], k_minutes: f64) -> Vec<StationSummary> {
    stations
        .iter()
        .map(|s| {
            let mine: Vec<&FireRecord> = fires.iter().filter(|f| f.station_id == s.id).collect();
            let primary: Vec<f64> =
                mine.iter().filter(|f| f.role == Role::Primary).map(|f| f.response_time_min).collect();
            let n = primary.len() as f64;
            StationSummary {
                id: s.id.clone(),
                location: s.location,
                commissioned: s.commissioned,
                staffing: s.staffing,
                total_actions: mine.len() as u64,
                primary: primary.len() as u64,
                backup: (mine.len() - primary.len()) as u64,
                mean_response_min: (!primary.is_empty()).then(|| primary.iter().sum::<f64>() / n),
                within_k_share: (!primary.is_empty())
                    .then(|| primary.iter().filter(|&&t| t < k_minutes).count() as f64 / n),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SdPoint {
    pub month: YearMonth,
    /// Observed city-wide count; absent past the end of the data.
    pub actual: Option<f64>,
    pub predicted: f64,
    pub baseline: f64,
    /// Signed city-wide attribution per feature, in `features` order.
    pub phi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SdSeries {
    pub features: Vec<String>,
    pub points: Vec<SdPoint>,
}

/// City-wide supply and demand series: predictions and attributions summed
/// over all cells, with observed counts taken from `tensor`.
pub fn sd_series(attribution: &AttributionFrame, tensor: &SpatioTemporalTensor) -> Result<SdSeries> {
    if attribution.grid != tensor.grid {
        return Err(Error::ShapeMismatch("attribution grid differs from the tensor grid".into()));
    }
    let count = tensor.require_channel(FIRE_COUNT)?;
    let points = (0..attribution.len())
        .map(|t| {
            let month = attribution.months[t];
            let input = month.add_months(-1);
            if tensor.time_index(input).is_none() {
                return Err(Error::ShapeMismatch(format!("tensor has no month {input} preceding {month}")));
            }
            let c = attribution.citywide(t);
            let actual = tensor.time_index(month).map(|i| tensor.plane(i, count).iter().sum());
            Ok(SdPoint { month, actual, predicted: c.predicted, baseline: c.baseline, phi: c.phi_by_feature })
        })
        .collect::<Result<_>>()?;
    Ok(SdSeries { features: attribution.features.clone(), points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::{attribute, fit, ForecastConfig};
    use crate::geo::{offset_km, GridSpec};
    use crate::model::FEATURE_NAMES;
    use chrono::{NaiveDate, NaiveDateTime};
    use proptest::prelude::*;

    fn origin() -> GeoPoint {
        GeoPoint::new(30.0, 120.0).unwrap()
    }

    fn when(y: i32, hour: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(y, 5, 1).unwrap().and_hms_opt(hour, 0, 0).unwrap()
    }

    fn rec(id: &str, year: i32, hour: u32, rt: f64, station: &str, role: Role, loc: GeoPoint) -> FireRecord {
        FireRecord { id: id.into(), location: loc, alarm_time: when(year, hour), response_time_min: rt, station_id: station.into(), role }
    }

    fn station(id: &str) -> Station {
        Station { id: id.into(), location: origin(), commissioned: NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(), staffing: Some(20) }
    }

    #[test]
    fn yearly_examples() {
        assert!(yearly_counts(&[]).is_empty());
        let o = origin();
        let fires = [
            rec("a", 2014, 1, 5.0, "S", Role::Primary, o),
            rec("b", 2014, 1, 5.0, "S", Role::Primary, o),
            rec("b", 2014, 1, 8.0, "T", Role::Backup, o),
            rec("c", 2014, 1, 5.0, "S", Role::Primary, o),
            rec("d", 2015, 1, 5.0, "S", Role::Primary, o),
        ];
        assert_eq!(yearly_counts(&fires), BTreeMap::from([(2014, 3), (2015, 1)]));
    }

    #[test]
    fn five_numbers() {
        let f = FiveNumber::of(&[5.0, 1.0, 4.0, 2.0, 3.0]).unwrap();
        assert_eq!((f.min, f.q1, f.median, f.q3, f.max, f.count), (1.0, 2.0, 3.0, 4.0, 5.0, 5));
        let s = FiveNumber::of(&[7.5]).unwrap();
        assert_eq!((s.min, s.q1, s.median, s.q3, s.max), (7.5, 7.5, 7.5, 7.5, 7.5));
        let q = FiveNumber::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((q.q1, q.median, q.q3), (1.75, 2.5, 3.25));
        assert!(FiveNumber::of(&[]).is_none());
    }

    #[test]
    fn distribution_by_year_uses_primary_records() {
        let o = origin();
        let fires = [
            rec("a", 2014, 1, 1.0, "S", Role::Primary, o),
            rec("a", 2014, 1, 100.0, "T", Role::Backup, o),
            rec("b", 2014, 1, 3.0, "S", Role::Primary, o),
            rec("c", 2016, 1, 4.0, "S", Role::Primary, o),
        ];
        let d = response_distribution(&fires);
        assert_eq!(d.iter().map(|y| y.year).collect::<Vec<_>>(), [2014, 2016]);
        assert_eq!((d[0].stats.max, d[0].stats.median, d[0].stats.count), (3.0, 2.0, 2));
    }

    #[test]
    fn sectors() {
        assert_eq!(compass_sector(0.0), 0);
        assert_eq!(compass_sector(359.0), 0);
        assert_eq!(compass_sector(330.0), 0);
        assert_eq!(compass_sector(29.99), 0);
        assert_eq!(compass_sector(30.0), 1);
        assert_eq!(compass_sector(90.0), 2);
        assert_eq!(compass_sector(180.0), 3);
        assert_eq!(compass_sector(329.9), 5);
    }

    #[test]
    fn profile_counts() {
        let north = offset_km(origin(), 0.0, 2.0);
        let southeast = offset_km(origin(), 2.0, -2.0);
        let fires = [
            rec("a", 2019, 1, 5.0, "S", Role::Primary, north),
            rec("b", 2019, 5, 9.0, "S", Role::Backup, southeast),
            rec("c", 2019, 23, 12.0, "S", Role::Primary, north),
            rec("d", 2019, 23, 12.0, "X", Role::Primary, north),
        ];
        let p = station_profile(&fires, &[station("S")], "S", 9.0, 4).unwrap();
        assert_eq!((p.total_actions, p.primary, p.backup), (3, 2, 1));
        assert_eq!(p.sectors, [2, 0, 1, 0, 0, 0]);
        assert_eq!(p.time_of_day.len(), 6);
        assert_eq!(p.time_of_day[0].split, ThresholdSplit { below_k: 1, at_or_above_k: 0 });
        assert_eq!(p.time_of_day[1].split, ThresholdSplit { below_k: 0, at_or_above_k: 1 });
        assert_eq!(p.time_of_day[5].split, ThresholdSplit { below_k: 0, at_or_above_k: 1 });
        assert!(matches!(station_profile(&fires, &[station("S")], "Q", 9.0, 4), Err(Error::UnknownStation(_))));
        assert!(station_profile(&fires, &[station("S")], "S", 9.0, 5).is_err());
    }

    #[test]
    fn summaries() {
        let o = origin();
        let fires = [
            rec("a", 2019, 1, 6.0, "S", Role::Primary, o),
            rec("b", 2019, 1, 12.0, "S", Role::Primary, o),
            rec("c", 2019, 1, 3.0, "S", Role::Backup, o),
        ];
        let s = station_summaries(&fires, &[station("S"), station("T")], 9.0);
        assert_eq!((s[0].total_actions, s[0].primary, s[0].backup), (3, 2, 1));
        assert_eq!(s[0].mean_response_min, Some(9.0));
        assert_eq!(s[0].within_k_share, Some(0.5));
        assert_eq!(s[1].mean_response_min, None);
    }

    fn tensor(rows: usize, cols: usize, months: usize) -> SpatioTemporalTensor {
        let grid = GridSpec::new(origin(), 1.0, rows, cols).unwrap();
        let start = YearMonth::new(2018, 1).unwrap();
        let stamps: Vec<YearMonth> = (0..months as i64).map(|i| start.add_months(i)).collect();
        let mut t = SpatioTemporalTensor::zeros(grid, crate::model::default_channels(), stamps).unwrap();
        for m in 0..months {
            for cell in 0..grid.len() {
                let temp = ((m * 5 + cell * 3) % 11) as f64;
                t.plane_mut(m, 1)[cell] = temp;
                t.plane_mut(m, 5)[cell] = (cell + 1) as f64;
                t.plane_mut(m, 0)[cell] = ((m + cell) % 4) as f64;
            }
        }
        t
    }

    #[test]
    fn series_sums_cells() {
        let t = tensor(1, 2, 24);
        let model = fit(&t, &ForecastConfig::default()).unwrap();
        let frame = attribute(&model, &t).unwrap();
        let s = sd_series(&frame, &t).unwrap();
        assert_eq!(s.features.len(), FEATURE_NAMES.len());
        assert_eq!(s.points.len(), frame.len());
        for (i, p) in s.points.iter().enumerate() {
            let sum: f64 = p.phi.iter().sum();
            assert!((sum - (p.predicted - p.baseline)).abs() <= 1e-6);
            let by_cell: f64 = (0..2).map(|c| frame.predicted[i][c]).sum();
            assert!((p.predicted - by_cell).abs() <= 1e-12);
        }
        assert_eq!(s.points.last().unwrap().actual, None);
        assert_eq!(s.points[0].actual, Some(t.plane(3, 0).iter().sum()));

        let other = tensor(2, 2, 24);
        assert!(sd_series(&frame, &other).is_err());
    }

    proptest! {
        #[test]
        fn tallies_match_recount(raw in prop::collection::vec((2010i32..2016, 0u32..24, 0.0..30.0f64, 0usize..3, any::<bool>(), 0.0..360.0f64), 0..200)) {
            let names = ["A", "B", "C"];
            let fires: Vec<FireRecord> = raw
                .iter()
                .enumerate()
                .map(|(i, &(y, h, rt, s, backup, brg))| {
                    let loc = offset_km(origin(), 3.0 * brg.to_radians().sin(), 3.0 * brg.to_radians().cos());
                    rec(&format!("f{i}"), y, h, rt, names[s], if backup { Role::Backup } else { Role::Primary }, loc)
                })
                .collect();
            let counts = yearly_counts(&fires);
            for (y, c) in &counts {
                prop_assert_eq!(*c as usize, fires.iter().filter(|f| f.alarm_time.year() == *y).count());
            }
            let mut rev = fires.clone();
            rev.reverse();
            prop_assert_eq!(&counts, &yearly_counts(&rev));
            prop_assert_eq!(response_distribution(&fires), response_distribution(&rev));
            for d in response_distribution(&fires) {
                let s = d.stats;
                prop_assert!(s.min <= s.q1 && s.q1 <= s.median && s.median <= s.q3 && s.q3 <= s.max);
            }
            let stations: Vec<Station> = names.iter().map(|n| station(n)).collect();
            for n in names {
                let p = station_profile(&fires, &stations, n, 9.0, 4).unwrap();
                prop_assert_eq!(p.sectors.iter().sum::<u64>(), p.total_actions);
                prop_assert_eq!(p.primary + p.backup, p.total_actions);
                let tod: u64 = p.time_of_day.iter().map(|b| b.split.below_k + b.split.at_or_above_k).sum();
                prop_assert_eq!(tod, p.total_actions);
                prop_assert_eq!(p.clone(), station_profile(&rev, &stations, n, 9.0, 4).unwrap());
            }
        }
    }
}
