//! Delimited-text readers for fires, stations and features, rasterization
//! into a [`SpatioTemporalTensor`], and the tensor file format.
//!
//! Malformed rows are quarantined into a rejects list instead of failing the
//! whole file. Structural problems (missing columns, duplicate station ids,
//! duplicate feature keys, feature rows pointing at cells outside the grid)
//! are fatal.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Read, Write};

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{CellIndex, GeoPoint, GridSpec};
use crate::model::{
    FireRecord, MonthWindow, Role, SpatioTemporalTensor, Station, YearMonth, FEATURE_NAMES, FIRE_COUNT,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing required column {0:?}")]
    MissingColumn(&'static str),

    #[error("duplicate station id {0:?}")]
    DuplicateStation(String),

    #[error("duplicate key for feature {feature:?}: {key}")]
    DuplicateFeatureKey { feature: String, key: String },

    #[error("feature {feature:?} references cell ({row}, {col}) outside the grid")]
    UnknownCell { feature: String, row: usize, col: usize },

    #[error("bad tensor file: {0}")]
    TensorFormat(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// A quarantined input row. `line` is the 1-based line in the source file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct Reject {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub rejects: Vec<Reject>,
}

struct Columns {
    index: HashMap<String, usize>,
}

impl Columns {
    fn new(headers: &csv::StringRecord) -> Self {
        let index = headers.iter().enumerate().map(|(i, h)| (h.trim().to_ascii_lowercase(), i)).collect();
        Columns { index }
    }

    fn require(&self, name: &'static str) -> Result<usize, IngestError> {
        self.index.get(name).copied().ok_or(IngestError::MissingColumn(name))
    }

    fn optional(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }
}

fn field(row: &csv::StringRecord, idx: usize) -> &str {
    row.get(idx).map(str::trim).unwrap_or("")
}

fn parse_f64(s: &str, what: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("bad {what} {s:?}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("non-finite {what}"))
    }
}

fn parse_point(lat: &str, lng: &str) -> Result<GeoPoint, String> {
    let lat = parse_f64(lat, "latitude")?;
    let lng = parse_f64(lng, "longitude")?;
    GeoPoint::new(lat, lng).map_err(|e| e.to_string())
}

/// ISO-8601 date-time. Offsets are dropped in favour of the wall-clock time.
pub fn parse_timestamp(s: &str) -> Result<NaiveDateTime, String> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.naive_local());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(dt);
        }
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).expect("midnight"));
    }
    Err(format!("bad timestamp {s:?}"))
}

fn reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(source)
}

fn line_of(row: &csv::StringRecord) -> u64 {
    row.position().map(|p| p.line()).unwrap_or(0)
}

/// Columns: `id, lat, lng, alarm_time, response_time_min, station_id, role`.
pub fn parse_fire_records<R: Read>(source: R) -> Result<Parsed<FireRecord>, IngestError> {
    let mut rdr = reader(source);
    let cols = Columns::new(rdr.headers()?);
    let id = cols.require("id")?;
    let lat = cols.require("lat")?;
    let lng = cols.require("lng")?;
    let alarm = cols.require("alarm_time")?;
    let response = cols.require("response_time_min")?;
    let station = cols.require("station_id")?;
    let role = cols.require("role")?;

    let mut out = Parsed { records: Vec::new(), rejects: Vec::new() };
    for row in rdr.records() {
        let row = row?;
        let parsed = (|| -> Result<FireRecord, String> {
            let rec_id = field(&row, id);
            if rec_id.is_empty() {
                return Err("missing id".into());
            }
            let location = parse_point(field(&row, lat), field(&row, lng))?;
            let alarm_time = parse_timestamp(field(&row, alarm))?;
            let response_time_min = parse_f64(field(&row, response), "response time")?;
            if response_time_min < 0.0 {
                return Err("negative response time".into());
            }
            let station_id = field(&row, station);
            if station_id.is_empty() {
                return Err("missing station id".into());
            }
            let role = field(&row, role).parse::<Role>().map_err(|_| format!("bad role {:?}", field(&row, role)))?;
            Ok(FireRecord {
                id: rec_id.to_string(),
                location,
                alarm_time,
                response_time_min,
                station_id: station_id.to_string(),
                role,
            })
        })();
        match parsed {
            Ok(r) => out.records.push(r),
            Err(reason) => out.rejects.push(Reject { line: line_of(&row), reason }),
        }
    }
    Ok(out)
}

/// Columns: `id, lat, lng, commissioned` and optionally `staffing`.
pub fn parse_stations<R: Read>(source: R) -> Result<Parsed<Station>, IngestError> {
    let mut rdr = reader(source);
    let cols = Columns::new(rdr.headers()?);
    let id = cols.require("id")?;
    let lat = cols.require("lat")?;
    let lng = cols.require("lng")?;
    let commissioned = cols.require("commissioned")?;
    let staffing = cols.optional("staffing");

    let mut seen = BTreeSet::new();
    let mut out = Parsed { records: Vec::new(), rejects: Vec::new() };
    for row in rdr.records() {
        let row = row?;
        let parsed = (|| -> Result<Station, String> {
            let sid = field(&row, id);
            if sid.is_empty() {
                return Err("missing id".into());
            }
            let location = parse_point(field(&row, lat), field(&row, lng))?;
            let raw = field(&row, commissioned);
            let commissioned = NaiveDate::parse_from_str(raw, "%Y-%m-%d")
                .or_else(|_| parse_timestamp(raw).map(|dt| dt.date()))
                .map_err(|_| format!("bad commissioned date {raw:?}"))?;
            let staffing = match staffing.map(|i| field(&row, i)).filter(|s| !s.is_empty()) {
                None => None,
                Some(s) => Some(s.parse::<u32>().map_err(|_| format!("bad staffing {s:?}"))?),
            };
            Ok(Station { id: sid.to_string(), location, commissioned, staffing })
        })();
        match parsed {
            Ok(s) => {
                if !seen.insert(s.id.clone()) {
                    return Err(IngestError::DuplicateStation(s.id));
                }
                out.records.push(s);
            }
            Err(reason) => out.rejects.push(Reject { line: line_of(&row), reason }),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    PerCellPerMonth,
    PerMonthGlobal,
    PerCellStatic,
}

impl std::fmt::Display for Granularity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Granularity::PerCellPerMonth => "per_cell_per_month",
            Granularity::PerMonthGlobal => "per_month_global",
            Granularity::PerCellStatic => "per_cell_static",
        })
    }
}

impl std::str::FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "per_cell_per_month" => Ok(Granularity::PerCellPerMonth),
            "per_month_global" => Ok(Granularity::PerMonthGlobal),
            "per_cell_static" => Ok(Granularity::PerCellStatic),
            other => Err(format!("unknown granularity {other:?}")),
        }
    }
}

/// Lookup key of a feature value; unused parts are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeatureKey {
    pub cell: Option<CellIndex>,
    pub month: Option<YearMonth>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub name: String,
    pub granularity: Granularity,
    pub values: BTreeMap<FeatureKey, f64>,
}

impl FeatureTable {
    pub fn new(name: impl Into<String>, granularity: Granularity) -> Self {
        FeatureTable { name: name.into(), granularity, values: BTreeMap::new() }
    }

    /// Inserts a value, keeping only the key parts the granularity uses.
    pub fn insert(&mut self, cell: Option<CellIndex>, month: Option<YearMonth>, value: f64) -> Result<(), IngestError> {
        let key = match self.granularity {
            Granularity::PerCellPerMonth => FeatureKey { cell, month },
            Granularity::PerMonthGlobal => FeatureKey { cell: None, month },
            Granularity::PerCellStatic => FeatureKey { cell, month: None },
        };
        if self.values.insert(key, value).is_some() {
            return Err(IngestError::DuplicateFeatureKey { feature: self.name.clone(), key: format!("{key:?}") });
        }
        Ok(())
    }

    /// Value broadcast to `(cell, month)`; `None` when the table has no entry.
    pub fn resolve(&self, cell: CellIndex, month: YearMonth) -> Option<f64> {
        let key = match self.granularity {
            Granularity::PerCellPerMonth => FeatureKey { cell: Some(cell), month: Some(month) },
            Granularity::PerMonthGlobal => FeatureKey { cell: None, month: Some(month) },
            Granularity::PerCellStatic => FeatureKey { cell: Some(cell), month: None },
        };
        self.values.get(&key).copied()
    }
}

/// Columns: `feature, granularity, cell_i, cell_j, month, value`. Tables come
/// back sorted by feature name.
pub fn parse_features<R: Read>(source: R) -> Result<Parsed<FeatureTable>, IngestError> {
    let mut rdr = reader(source);
    let cols = Columns::new(rdr.headers()?);
    let feature = cols.require("feature")?;
    let granularity = cols.require("granularity")?;
    let cell_i = cols.require("cell_i")?;
    let cell_j = cols.require("cell_j")?;
    let month = cols.require("month")?;
    let value = cols.require("value")?;

    let mut tables: BTreeMap<String, FeatureTable> = BTreeMap::new();
    let mut rejects = Vec::new();
    for row in rdr.records() {
        let row = row?;
        type Row = (String, Granularity, Option<CellIndex>, Option<YearMonth>, f64);
        let parsed = (|| -> Result<Row, String> {
            let name = field(&row, feature);
            if name.is_empty() {
                return Err("missing feature name".into());
            }
            let gran: Granularity = field(&row, granularity).parse()?;
            let cell = match gran {
                Granularity::PerMonthGlobal => None,
                _ => {
                    let i = field(&row, cell_i).parse::<usize>().map_err(|_| "bad cell_i".to_string())?;
                    let j = field(&row, cell_j).parse::<usize>().map_err(|_| "bad cell_j".to_string())?;
                    Some(CellIndex::new(i, j))
                }
            };
            let m = match gran {
                Granularity::PerCellStatic => None,
                _ => Some(field(&row, month).parse::<YearMonth>().map_err(|e| e.to_string())?),
            };
            let v = parse_f64(field(&row, value), "value")?;
            Ok((name.to_string(), gran, cell, m, v))
        })();
        match parsed {
            Ok((name, gran, cell, m, v)) => {
                let table = tables.entry(name.clone()).or_insert_with(|| FeatureTable::new(name, gran));
                if table.granularity != gran {
                    rejects.push(Reject {
                        line: line_of(&row),
                        reason: format!("granularity conflicts with earlier rows of {:?}", table.name),
                    });
                    continue;
                }
                table.insert(cell, m, v)?;
            }
            Err(reason) => rejects.push(Reject { line: line_of(&row), reason }),
        }
    }
    Ok(Parsed { records: tables.into_values().collect(), rejects })
}

/// Rasterized tensor plus tallies of records that did not land in it.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub tensor: SpatioTemporalTensor,
    pub skipped_out_of_extent: usize,
    pub skipped_out_of_window: usize,
}

/// Channel order: `fire_count`, the five standard features, then any other
/// feature tables by name. Standard features without a table, and table
/// entries missing for a (cell, month), are filled with 0.
pub fn rasterize(
    records: &[FireRecord],
    features: &[FeatureTable],
    grid: &GridSpec,
    window: MonthWindow,
) -> Result<Raster, crate::Error> {
    grid.validate()?;
    let by_name: BTreeMap<&str, &FeatureTable> = features.iter().map(|t| (t.name.as_str(), t)).collect();
    if by_name.len() != features.len() {
        return Err(crate::Error::invalid("duplicate feature table name"));
    }
    for t in features {
        if let Some(key) = t.values.keys().find(|k| k.cell.is_some_and(|c| !grid.contains_index(c))) {
            let c = key.cell.expect("checked");
            return Err(IngestError::UnknownCell { feature: t.name.clone(), row: c.row, col: c.col }.into());
        }
    }

    let mut channels: Vec<String> = vec![FIRE_COUNT.to_string()];
    channels.extend(FEATURE_NAMES.iter().map(|s| s.to_string()));
    channels.extend(by_name.keys().filter(|n| !FEATURE_NAMES.contains(n) && **n != FIRE_COUNT).map(|s| s.to_string()));

    let months: Vec<YearMonth> = window.months().collect();
    let mut tensor = SpatioTemporalTensor::zeros(*grid, channels.clone(), months.clone())?;

    let (mut out_extent, mut out_window) = (0, 0);
    for r in records {
        let Some(t) = window.index_of(r.month()) else {
            out_window += 1;
            continue;
        };
        let Some(cell) = grid.cell_of(r.location) else {
            out_extent += 1;
            continue;
        };
        tensor.plane_mut(t, 0)[grid.flat(cell)] += 1.0;
    }

    for (c, name) in channels.iter().enumerate().skip(1) {
        let Some(table) = by_name.get(name.as_str()) else { continue };
        for (t, &m) in months.iter().enumerate() {
            let plane = tensor.plane_mut(t, c);
            for (idx, v) in plane.iter_mut().enumerate() {
                *v = table.resolve(grid.unflat(idx), m).unwrap_or(0.0);
            }
        }
    }

    Ok(Raster { tensor, skipped_out_of_extent: out_extent, skipped_out_of_window: out_window })
}

/// Header line of the tensor file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorHeader {
    pub format: String,
    pub grid: GridSpec,
    pub channels: Vec<String>,
    pub timestamps: Vec<YearMonth>,
    pub encoding: String,
    pub layout: String,
    pub value_count: usize,
}

pub const TENSOR_FORMAT: &str = "firecover-tensor/1";

/// Writes one line of compact JSON header, `\n`, then `value_count` IEEE-754
/// binary64 values in little-endian byte order, laid out `[t][c][row][col]`
/// with the last index fastest.
pub fn write_tensor<W: Write>(tensor: &SpatioTemporalTensor, mut out: W) -> std::io::Result<()> {
    let header = TensorHeader {
        format: TENSOR_FORMAT.into(),
        grid: tensor.grid,
        channels: tensor.channels.clone(),
        timestamps: tensor.timestamps.clone(),
        encoding: "f64le".into(),
        layout: "t,c,row,col".into(),
        value_count: tensor.values().len(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for v in tensor.values() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()
}

pub fn read_tensor<R: BufRead>(mut input: R) -> Result<SpatioTemporalTensor, crate::Error> {
    let mut line = Vec::new();
    input.read_until(b'\n', &mut line)?;
    let header: TensorHeader = serde_json::from_slice(&line)?;
    if header.format != TENSOR_FORMAT || header.encoding != "f64le" || header.layout != "t,c,row,col" {
        return Err(IngestError::TensorFormat(format!("unsupported header {} / {}", header.format, header.encoding)).into());
    }
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() != header.value_count * 8 {
        return Err(IngestError::TensorFormat(format!(
            "expected {} value bytes, found {}",
            header.value_count * 8,
            bytes.len()
        ))
        .into());
    }
    let values = bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
    SpatioTemporalTensor::from_values(header.grid, header.channels, header.timestamps, values)
}

/// Writes fires in the layout [`parse_fire_records`] reads.
pub fn write_fire_records<W: Write>(fires: &[FireRecord], out: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "lat", "lng", "alarm_time", "response_time_min", "station_id", "role"])?;
    for f in fires {
        w.write_record([
            f.id.clone(),
            f.location.lat.to_string(),
            f.location.lng.to_string(),
            f.alarm_time.format("%Y-%m-%dT%H:%M:%S").to_string(),
            f.response_time_min.to_string(),
            f.station_id.clone(),
            f.role.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Writes stations in the layout [`parse_stations`] reads.
pub fn write_stations<W: Write>(stations: &[Station], out: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "lat", "lng", "commissioned", "staffing"])?;
    for s in stations {
        w.write_record([
            s.id.clone(),
            s.location.lat.to_string(),
            s.location.lng.to_string(),
            s.commissioned.format("%Y-%m-%d").to_string(),
            s.staffing.map(|n| n.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Writes feature tables in the layout [`parse_features`] reads.
pub fn write_features<W: Write>(tables: &[FeatureTable], out: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["feature", "granularity", "cell_i", "cell_j", "month", "value"])?;
    for t in tables {
        for (key, v) in &t.values {
            w.write_record([
                t.name.clone(),
                t.granularity.to_string(),
                key.cell.map(|c| c.row.to_string()).unwrap_or_default(),
                key.cell.map(|c| c.col.to_string()).unwrap_or_default(),
                key.month.map(|m| m.to_string()).unwrap_or_default(),
                v.to_string(),
            ])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Drops fires whose station id is not among `stations`, reporting them by fire id.
pub fn split_unknown_stations(fires: Vec<FireRecord>, stations: &[Station]) -> (Vec<FireRecord>, Vec<String>) {
    let known: BTreeSet<&str> = stations.iter().map(|s| s.id.as_str()).collect();
    let (ok, bad): (Vec<_>, Vec<_>) = fires.into_iter().partition(|f| known.contains(f.station_id.as_str()));
    (ok, bad.into_iter().map(|f| f.id).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::offset_km;

    const FIRES: &str = "\
id,lat,lng,alarm_time,response_time_min,station_id,role
f1,30.01,120.01,2015-03-02T18:40,12.5,S1,primary
f2,30.02,120.02,2015-03-05T08:00:00,7,S1,backup
f3,30.03,120.03,2015-04-01T00:10,9,S2,Primary
";

    #[test]
    fn parses_valid_fires() {
        let p = parse_fire_records(FIRES.as_bytes()).unwrap();
        assert_eq!(p.records.len(), 3);
        assert!(p.rejects.is_empty());
        let f = &p.records[0];
        assert_eq!(f.response_time_min, 12.5);
        assert_eq!(f.alarm_time, NaiveDate::from_ymd_opt(2015, 3, 2).unwrap().and_hms_opt(18, 40, 0).unwrap());
        assert_eq!(f.role, Role::Primary);
        assert_eq!(p.records[2].role, Role::Primary);
    }

    #[test]
    fn negative_response_is_rejected() {
        let src = format!("{FIRES}f4,30.0,120.0,2015-05-01T00:00,-1,S1,primary\n");
        let p = parse_fire_records(src.as_bytes()).unwrap();
        assert_eq!(p.records.len(), 3);
        assert_eq!(p.rejects, vec![Reject { line: 5, reason: "negative response time".into() }]);
    }

    #[test]
    fn malformed_rows_are_quarantined() {
        let src = format!(
            "{FIRES}f5,95.0,120.0,2015-05-01T00:00,3,S1,primary\nf6,30,120,yesterday,3,S1,primary\nf7,30,120,2015-05-01T00:00,3,S1,chief\n"
        );
        let p = parse_fire_records(src.as_bytes()).unwrap();
        assert_eq!(p.records.len(), 3);
        assert_eq!(p.rejects.len(), 3);
        assert!(p.rejects[1].reason.contains("timestamp"));
        assert!(p.rejects[2].reason.contains("role"));
    }

    #[test]
    fn missing_column_is_fatal() {
        let src = "id,lat,lng,alarm_time,station_id,role\n";
        assert!(matches!(parse_fire_records(src.as_bytes()), Err(IngestError::MissingColumn("response_time_min"))));
    }

    #[test]
    fn parses_stations_with_and_without_staffing() {
        let src = "id,lat,lng,commissioned,staffing\nS1,30,120,2010-01-01,25\nS2,30.1,120.1,2012-06-30,\n";
        let p = parse_stations(src.as_bytes()).unwrap();
        assert_eq!(p.records.len(), 2);
        assert_eq!(p.records[0].staffing, Some(25));
        assert_eq!(p.records[1].staffing, None);

        let src = "id,lat,lng,commissioned\nS1,30,120,2010-01-01\nS2,30.1,120.1,2012-06-30\n";
        let p = parse_stations(src.as_bytes()).unwrap();
        assert!(p.records.iter().all(|s| s.staffing.is_none()));
    }

    #[test]
    fn duplicate_station_is_fatal() {
        let src = "id,lat,lng,commissioned\nS1,30,120,2010-01-01\nS1,30.1,120.1,2012-06-30\n";
        match parse_stations(src.as_bytes()) {
            Err(IngestError::DuplicateStation(id)) => assert_eq!(id, "S1"),
            other => panic!("expected duplicate error, got {other:?}"),
        }
    }

    fn grid() -> GridSpec {
        GridSpec::new(GeoPoint::new(30.0, 120.0).unwrap(), 3.0, 2, 2).unwrap()
    }

    fn fire(id: &str, east: f64, north: f64, month: u32) -> FireRecord {
        FireRecord {
            id: id.into(),
            location: offset_km(grid().origin, east, north),
            alarm_time: NaiveDate::from_ymd_opt(2015, month, 10).unwrap().and_hms_opt(12, 0, 0).unwrap(),
            response_time_min: 5.0,
            station_id: "S1".into(),
            role: Role::Primary,
        }
    }

    fn window() -> MonthWindow {
        MonthWindow::new(YearMonth::new(2015, 1).unwrap(), YearMonth::new(2015, 2).unwrap()).unwrap()
    }

    #[test]
    fn single_fire_raster() {
        let r = rasterize(&[fire("a", 1.0, 1.0, 1)], &[], &grid(), window()).unwrap();
        let t = &r.tensor;
        assert_eq!(t.get(0, 0, CellIndex::new(0, 0)), 1.0);
        let total: f64 = (0..t.len()).map(|m| t.plane(m, 0).iter().sum::<f64>()).sum();
        assert_eq!(total, 1.0);
        assert_eq!(t.channels.len(), 6);
    }

    #[test]
    fn empty_records_give_zero_counts() {
        let r = rasterize(&[], &[], &grid(), window()).unwrap();
        assert!(r.tensor.plane(0, 0).iter().chain(r.tensor.plane(1, 0)).all(|&v| v == 0.0));
    }

    #[test]
    fn five_fires_two_cells_two_months() {
        let fires = vec![
            fire("a", 1.0, 1.0, 1),
            fire("b", 4.0, 1.0, 1),
            fire("c", 4.5, 2.0, 1),
            fire("d", 1.0, 2.9, 2),
            fire("e", 5.9, 0.1, 2),
            fire("out-extent", 10.0, 1.0, 1),
            fire("out-window", 1.0, 1.0, 5),
        ];
        let r = rasterize(&fires, &[], &grid(), window()).unwrap();
        // brute-force tally of the in-extent, in-window fixture rows
        let mut expected = [[0.0; 4]; 2];
        for f in &fires[..5] {
            let m = (f.month().month - 1) as usize;
            let c = grid().cell_of(f.location).unwrap();
            expected[m][grid().flat(c)] += 1.0;
        }
        assert_eq!(expected[0], [1.0, 2.0, 0.0, 0.0]);
        assert_eq!(expected[1], [1.0, 1.0, 0.0, 0.0]);
        assert_eq!(r.tensor.plane(0, 0), &expected[0]);
        assert_eq!(r.tensor.plane(1, 0), &expected[1]);
        assert_eq!(r.skipped_out_of_extent, 1);
        assert_eq!(r.skipped_out_of_window, 1);
    }

    #[test]
    fn features_broadcast_by_granularity() {
        let src = "\
feature,granularity,cell_i,cell_j,month,value
avg_temperature,per_month_global,,,2015-01,4.5
avg_temperature,per_month_global,,,2015-02,6.0
avg_population_density,per_cell_static,1,1,,900
precipitation_days,per_cell_per_month,0,1,2015-02,12
";
        let p = parse_features(src.as_bytes()).unwrap();
        assert!(p.rejects.is_empty());
        let r = rasterize(&[], &p.records, &grid(), window()).unwrap();
        let t = &r.tensor;
        let temp = t.channel("avg_temperature").unwrap();
        let pop = t.channel("avg_population_density").unwrap();
        let precip = t.channel("precipitation_days").unwrap();
        assert!(t.plane(0, temp).iter().all(|&v| v == 4.5));
        assert!(t.plane(1, temp).iter().all(|&v| v == 6.0));
        assert_eq!(t.get(0, pop, CellIndex::new(1, 1)), 900.0);
        assert_eq!(t.get(1, pop, CellIndex::new(1, 1)), 900.0);
        assert_eq!(t.get(0, pop, CellIndex::new(0, 0)), 0.0);
        assert_eq!(t.get(1, precip, CellIndex::new(0, 1)), 12.0);
        assert_eq!(t.get(0, precip, CellIndex::new(0, 1)), 0.0);
    }

    #[test]
    fn feature_on_unknown_cell_is_fatal() {
        let src = "feature,granularity,cell_i,cell_j,month,value\navg_temperature,per_cell_static,5,0,,1\n";
        let p = parse_features(src.as_bytes()).unwrap();
        let err = rasterize(&[], &p.records, &grid(), window()).unwrap_err();
        assert!(matches!(err, crate::Error::Ingest(IngestError::UnknownCell { row: 5, .. })));
    }

    #[test]
    fn duplicate_feature_key_is_fatal() {
        let src = "feature,granularity,cell_i,cell_j,month,value\nx,per_month_global,,,2015-01,1\nx,per_month_global,,,2015-01,2\n";
        assert!(matches!(parse_features(src.as_bytes()), Err(IngestError::DuplicateFeatureKey { .. })));
    }

    #[test]
    fn tensor_file_round_trip() {
        let src = "feature,granularity,cell_i,cell_j,month,value\navg_temperature,per_month_global,,,2015-01,-3.25\n";
        let p = parse_features(src.as_bytes()).unwrap();
        let r = rasterize(&[fire("a", 1.0, 1.0, 2)], &p.records, &grid(), window()).unwrap();
        let mut buf = Vec::new();
        write_tensor(&r.tensor, &mut buf).unwrap();
        let back = read_tensor(buf.as_slice()).unwrap();
        assert_eq!(back, r.tensor);
        let header_end = buf.iter().position(|&b| b == b'\n').unwrap();
        assert_eq!(buf.len() - header_end - 1, r.tensor.values().len() * 8);
    }

    #[test]
    fn truncated_tensor_file_is_rejected() {
        let r = rasterize(&[], &[], &grid(), window()).unwrap();
        let mut buf = Vec::new();
        write_tensor(&r.tensor, &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_tensor(buf.as_slice()).is_err());
    }
}
