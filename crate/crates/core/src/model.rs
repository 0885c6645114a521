//! Records, stations and the monthly spatiotemporal raster.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate, NaiveDateTime};
use schemars::JsonSchema;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geo::{CellIndex, GeoPoint, GridSpec};

pub const FIRE_COUNT: &str = "fire_count";

/// The five explanatory features, in channel order.
pub const FEATURE_NAMES: [&str; 5] = [
    "avg_temperature",
    "precipitation_days",
    "avg_enterprise_density",
    "avg_enterprise_size",
    "avg_population_density",
];

pub const FEATURE_COUNT: usize = FEATURE_NAMES.len();

pub fn default_channels() -> Vec<String> {
    std::iter::once(FIRE_COUNT).chain(FEATURE_NAMES).map(String::from).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Primary,
    Backup,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Primary => "primary",
            Role::Backup => "backup",
        })
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "primary" => Ok(Role::Primary),
            "backup" => Ok(Role::Backup),
            other => Err(Error::invalid(format!("unknown role {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct FireRecord {
    pub id: String,
    pub location: GeoPoint,
    pub alarm_time: NaiveDateTime,
    pub response_time_min: f64,
    pub station_id: String,
    pub role: Role,
}

impl FireRecord {
    pub fn month(&self) -> YearMonth {
        YearMonth::of(self.alarm_time.date())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Station {
    pub id: String,
    pub location: GeoPoint,
    pub commissioned: NaiveDate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub staffing: Option<u32>,
}

/// Calendar month, ordered chronologically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: i32,
    /// 1..=12
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::invalid(format!("month {month} outside 1..=12")));
        }
        Ok(YearMonth { year, month })
    }

    pub fn of(date: NaiveDate) -> Self {
        YearMonth { year: date.year(), month: date.month() }
    }

    /// Months since year 0.
    pub fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn from_ordinal(ord: i64) -> Self {
        YearMonth { year: ord.div_euclid(12) as i32, month: ord.rem_euclid(12) as u32 + 1 }
    }

    pub fn add_months(self, n: i64) -> Self {
        Self::from_ordinal(self.ordinal() + n)
    }

    pub fn first_day(self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, 1).expect("valid year-month")
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (y, m) = s
            .split_once('-')
            .ok_or_else(|| Error::invalid(format!("expected YYYY-MM, got {s:?}")))?;
        let year = y.parse().map_err(|_| Error::invalid(format!("bad year in {s:?}")))?;
        let month = m.parse().map_err(|_| Error::invalid(format!("bad month in {s:?}")))?;
        YearMonth::new(year, month)
    }
}

impl Serialize for YearMonth {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl JsonSchema for YearMonth {
    fn schema_name() -> std::borrow::Cow<'static, str> {
        "YearMonth".into()
    }

    fn json_schema(_: &mut schemars::SchemaGenerator) -> schemars::Schema {
        schemars::json_schema!({ "type": "string", "pattern": "^-?[0-9]{4,}-[0-9]{2}$" })
    }
}

/// Inclusive month range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct MonthWindow {
    pub start: YearMonth,
    pub end: YearMonth,
}

impl MonthWindow {
    pub fn new(start: YearMonth, end: YearMonth) -> Result<Self> {
        if end < start {
            return Err(Error::invalid(format!("empty window {start}..{end}")));
        }
        Ok(MonthWindow { start, end })
    }

    pub fn len(&self) -> usize {
        (self.end.ordinal() - self.start.ordinal() + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, m: YearMonth) -> bool {
        self.start <= m && m <= self.end
    }

    pub fn index_of(&self, m: YearMonth) -> Option<usize> {
        self.contains(m).then(|| (m.ordinal() - self.start.ordinal()) as usize)
    }

    pub fn months(&self) -> impl Iterator<Item = YearMonth> {
        let start = self.start.ordinal();
        (start..=self.end.ordinal()).map(YearMonth::from_ordinal)
    }

    /// Smallest window covering every record's alarm month.
    pub fn spanning<'a>(records: impl IntoIterator<Item = &'a FireRecord>) -> Option<Self> {
        let mut it = records.into_iter().map(FireRecord::month);
        let first = it.next()?;
        let (lo, hi) = it.fold((first, first), |(lo, hi), m| (lo.min(m), hi.max(m)));
        Some(MonthWindow { start: lo, end: hi })
    }
}

/// Dense `[t][c][row][col]` raster over consecutive months.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatioTemporalTensor {
    pub grid: GridSpec,
    pub channels: Vec<String>,
    pub timestamps: Vec<YearMonth>,
    values: Vec<f64>,
}

impl SpatioTemporalTensor {
    pub fn zeros(grid: GridSpec, channels: Vec<String>, timestamps: Vec<YearMonth>) -> Result<Self> {
        let n = timestamps.len() * channels.len() * grid.len();
        Self::from_values(grid, channels, timestamps, vec![0.0; n])
    }

    pub fn from_values(
        grid: GridSpec,
        channels: Vec<String>,
        timestamps: Vec<YearMonth>,
        values: Vec<f64>,
    ) -> Result<Self> {
        grid.validate()?;
        let expected = timestamps.len() * channels.len() * grid.len();
        if values.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} months x {} channels x {} cells",
                values.len(),
                timestamps.len(),
                channels.len(),
                grid.len()
            )));
        }
        let t = SpatioTemporalTensor { grid, channels, timestamps, values };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(step) = self.timestamps.windows(2).next().map(|w| w[1].ordinal() - w[0].ordinal()) {
            if step <= 0 {
                return Err(Error::invalid("timestamps must be strictly increasing"));
            }
            if self.timestamps.windows(2).any(|w| w[1].ordinal() - w[0].ordinal() != step) {
                return Err(Error::invalid("timestamps must have a uniform interval"));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        if !self.channels.iter().all(|c| seen.insert(c.as_str())) {
            return Err(Error::invalid("duplicate channel name"));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("tensor values must be finite"));
        }
        if let Some(c) = self.channel(FIRE_COUNT) {
            for t in 0..self.timestamps.len() {
                if self.plane(t, c).iter().any(|&v| v < 0.0 || v.fract() != 0.0) {
                    return Err(Error::invalid("fire_count must hold non-negative integers"));
                }
            }
        }
        Ok(())
    }

    pub fn channel(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == name)
    }

    pub fn require_channel(&self, name: &str) -> Result<usize> {
        self.channel(name).ok_or_else(|| Error::ShapeMismatch(format!("missing channel {name:?}")))
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn plane_offset(&self, t: usize, c: usize) -> usize {
        (t * self.channels.len() + c) * self.grid.len()
    }

    /// Row-major cell values for month `t`, channel `c`.
    pub fn plane(&self, t: usize, c: usize) -> &[f64] {
        let o = self.plane_offset(t, c);
        &self.values[o..o + self.grid.len()]
    }

    pub fn plane_mut(&mut self, t: usize, c: usize) -> &mut [f64] {
        let o = self.plane_offset(t, c);
        let n = self.grid.len();
        &mut self.values[o..o + n]
    }

    pub fn get(&self, t: usize, c: usize, cell: CellIndex) -> f64 {
        self.plane(t, c)[self.grid.flat(cell)]
    }

    pub fn time_index(&self, m: YearMonth) -> Option<usize> {
        self.timestamps.iter().position(|&x| x == m)
    }

    /// Copy of months `range`.
    pub fn slice_months(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.end > self.len() || range.start > range.end {
            return Err(Error::ShapeMismatch(format!("month range {range:?} outside 0..{}", self.len())));
        }
        let per_t = self.channels.len() * self.grid.len();
        let values = self.values[range.start * per_t..range.end * per_t].to_vec();
        Ok(SpatioTemporalTensor {
            grid: self.grid,
            channels: self.channels.clone(),
            timestamps: self.timestamps[range].to_vec(),
            values,
        })
    }
}
