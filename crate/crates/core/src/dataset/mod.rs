//! 15-minute time tables and their on-disk representation.

mod csv_io;
mod fetch;
mod manifest;
mod synth;
mod validate;

use std::collections::HashMap;
use std::fmt;

use chrono::{DateTime, Datelike, NaiveDateTime, TimeZone, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use csv_io::{load_table, read_table_csv, write_table, write_table_csv};
pub use fetch::fetch_dataset;
pub use manifest::{Manifest, ManifestColumn, Unit};
pub use synth::{
    synth_generate, FeatureProcess, GroundTruth, NoiseModel, SynthFeature, SynthSpec, SynthTarget,
    TargetTerm, TermShape,
};
pub use validate::{validate_schema, Finding, ValidationReport};

/// A numeric column; `None` marks a missing entry.
pub type Series = Vec<Option<f64>>;

/// Minutes between consecutive rows of every [`TimeTable`].
pub const SLOT_MINUTES: i64 = 15;
/// Number of 15-minute slots in a day.
pub const SLOTS_PER_DAY: usize = 96;

/// A UTC instant on the 15-minute grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(DateTime<Utc>);

impl Timestamp {
    pub fn new(instant: DateTime<Utc>) -> Result<Self> {
        if instant.minute() % 15 != 0 || instant.second() != 0 || instant.nanosecond() != 0 {
            return Err(Error::InvalidArgument(format!(
                "{} is not on the 15-minute grid",
                instant.format("%Y-%m-%dT%H:%M:%SZ")
            )));
        }
        Ok(Timestamp(instant))
    }

    pub fn from_ymd_hm(year: i32, month: u32, day: u32, hour: u32, minute: u32) -> Result<Self> {
        let dt = Utc
            .with_ymd_and_hms(year, month, day, hour, minute, 0)
            .single()
            .ok_or_else(|| Error::InvalidArgument(format!("invalid date {year}-{month}-{day}")))?;
        Self::new(dt)
    }

    /// Parses an ISO-8601 instant; an explicit offset is converted to UTC, a
    /// value without offset is read as UTC.
    pub fn parse(text: &str) -> Option<DateTime<Utc>> {
        let text = text.trim();
        if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
            return Some(dt.with_timezone(&Utc));
        }
        if let Ok(dt) = DateTime::parse_from_str(text, "%Y-%m-%d %H:%M:%S%:z") {
            return Some(dt.with_timezone(&Utc));
        }
        for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
            if let Ok(naive) = NaiveDateTime::parse_from_str(text, fmt) {
                return Some(naive.and_utc());
            }
        }
        None
    }

    pub fn instant(&self) -> DateTime<Utc> {
        self.0
    }

    pub fn unix_minutes(&self) -> i64 {
        self.0.timestamp() / 60
    }

    /// The timestamp `n` slots later (or earlier for negative `n`).
    pub fn add_slots(&self, n: i64) -> Self {
        Timestamp(self.0 + chrono::Duration::minutes(n * SLOT_MINUTES))
    }

    /// Slot of the UTC day, `0..96`.
    pub fn slot_of_day(&self) -> usize {
        (self.0.hour() * 4 + self.0.minute() / 15) as usize
    }

    pub fn year(&self) -> i32 {
        self.0.year()
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format("%Y-%m-%dT%H:%M:%SZ"))
    }
}

/// `n` consecutive timestamps starting at `start`.
pub fn regular_index(start: Timestamp, n: usize) -> Vec<Timestamp> {
    (0..n as i64).map(|i| start.add_slots(i)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    DayAhead,
    Actual,
    Engineered,
    Target,
    Benchmark,
    Calendar,
}

impl ColumnKind {
    /// Whether columns of this kind may enter a feature matrix.
    pub fn is_feature(self) -> bool {
        !matches!(self, ColumnKind::Target | ColumnKind::Benchmark)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Area {
    #[default]
    #[serde(rename = "DE")]
    De,
    #[serde(rename = "IGCC_other")]
    IgccOther,
}

/// Physical category of a column, used to decide which model variants see it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Load,
    Renewable,
    Flow,
    Dispatchable,
    Price,
    Other,
}

/// How an engineered column was derived.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "op")]
pub enum Origin {
    Ramp { of: String },
    ForecastError { forecast: String, actual: String },
    UnscheduledFlow { total: String, physical: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub unit: String,
    pub kind: ColumnKind,
    #[serde(default)]
    pub area: Area,
    #[serde(default = "default_resolution")]
    pub native_resolution: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<Group>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Origin>,
}

fn default_resolution() -> u32 {
    15
}

impl ColumnMeta {
    pub fn new(name: impl Into<String>, unit: impl Into<String>, kind: ColumnKind) -> Self {
        ColumnMeta {
            name: name.into(),
            unit: unit.into(),
            kind,
            area: Area::De,
            native_resolution: 15,
            group: None,
            origin: None,
        }
    }

    pub fn with_area(mut self, area: Area) -> Self {
        self.area = area;
        self
    }

    pub fn with_group(mut self, group: Group) -> Self {
        self.group = Some(group);
        self
    }

    pub fn with_resolution(mut self, minutes: u32) -> Self {
        self.native_resolution = minutes;
        self
    }

    pub fn with_origin(mut self, origin: Origin) -> Self {
        self.origin = Some(origin);
        self
    }

    fn check(&self) -> Result<()> {
        if !matches!(self.native_resolution, 15 | 60 | 240) {
            return Err(Error::Schema(format!(
                "column {:?}: native resolution {} not in {{15, 60, 240}}",
                self.name, self.native_resolution
            )));
        }
        if self.kind == ColumnKind::Target && (self.unit != "GW" || self.area != Area::De) {
            return Err(Error::Schema(format!(
                "target column {:?} must be in GW for area DE",
                self.name
            )));
        }
        Ok(())
    }
}

/// Immutable table of named numeric columns on a contiguous 15-minute index.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeTable {
    index: Vec<Timestamp>,
    columns: Vec<Series>,
    meta: Vec<ColumnMeta>,
    lookup: HashMap<String, usize>,
}

impl TimeTable {
    /// Builds a table, checking spacing, column lengths, name uniqueness and
    /// column metadata.
    pub fn new(index: Vec<Timestamp>, columns: Vec<(ColumnMeta, Series)>) -> Result<Self> {
        for (i, pair) in index.windows(2).enumerate() {
            if pair[1].unix_minutes() - pair[0].unix_minutes() != SLOT_MINUTES {
                return Err(Error::NonMonotonic {
                    row: i + 2,
                    value: pair[1].to_string(),
                });
            }
        }
        let mut lookup = HashMap::with_capacity(columns.len());
        let mut metas = Vec::with_capacity(columns.len());
        let mut data = Vec::with_capacity(columns.len());
        for (pos, (meta, series)) in columns.into_iter().enumerate() {
            meta.check()?;
            if series.len() != index.len() {
                return Err(Error::LengthMismatch(format!(
                    "column {:?} has {} entries, index has {}",
                    meta.name,
                    series.len(),
                    index.len()
                )));
            }
            if lookup.insert(meta.name.clone(), pos).is_some() {
                return Err(Error::DuplicateColumn(meta.name));
            }
            let series = series
                .into_iter()
                .map(|v| v.filter(|x| !x.is_nan()))
                .collect();
            metas.push(meta);
            data.push(series);
        }
        Ok(TimeTable {
            index,
            columns: data,
            meta: metas,
            lookup,
        })
    }

    pub fn index(&self) -> &[Timestamp] {
        &self.index
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.meta.iter().map(|m| m.name.as_str())
    }

    pub fn metas(&self) -> &[ColumnMeta] {
        &self.meta
    }

    pub fn contains(&self, name: &str) -> bool {
        self.lookup.contains_key(name)
    }

    pub fn column(&self, name: &str) -> Result<&Series> {
        self.lookup
            .get(name)
            .map(|&i| &self.columns[i])
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn meta(&self, name: &str) -> Result<&ColumnMeta> {
        self.lookup
            .get(name)
            .map(|&i| &self.meta[i])
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    /// Iterates `(meta, series)` pairs in column order.
    pub fn iter(&self) -> impl Iterator<Item = (&ColumnMeta, &Series)> {
        self.meta.iter().zip(self.columns.iter())
    }

    /// A new table with `extra` columns appended.
    pub fn with_columns(&self, extra: Vec<(ColumnMeta, Series)>) -> Result<TimeTable> {
        let mut cols: Vec<_> = self.iter().map(|(m, s)| (m.clone(), s.clone())).collect();
        cols.extend(extra);
        TimeTable::new(self.index.clone(), cols)
    }

    /// A new table with the named column replaced.
    pub fn with_replaced(&self, meta: ColumnMeta, series: Series) -> Result<TimeTable> {
        let pos = *self
            .lookup
            .get(&meta.name)
            .ok_or_else(|| Error::UnknownColumn(meta.name.clone()))?;
        let mut cols: Vec<_> = self.iter().map(|(m, s)| (m.clone(), s.clone())).collect();
        cols[pos] = (meta, series);
        TimeTable::new(self.index.clone(), cols)
    }

    /// A new table without the named columns; unknown names are ignored.
    pub fn without_columns(&self, names: &[String]) -> Result<TimeTable> {
        let cols = self
            .iter()
            .filter(|(m, _)| !names.contains(&m.name))
            .map(|(m, s)| (m.clone(), s.clone()))
            .collect();
        TimeTable::new(self.index.clone(), cols)
    }

    /// Fraction of missing entries in a column.
    pub fn missing_fraction(&self, name: &str) -> Result<f64> {
        let col = self.column(name)?;
        if col.is_empty() {
            return Ok(0.0);
        }
        Ok(col.iter().filter(|v| v.is_none()).count() as f64 / col.len() as f64)
    }
}


impl Serialize for Timestamp {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        let instant = Timestamp::parse(&text)
            .ok_or_else(|| serde::de::Error::custom(format!("invalid timestamp {text:?}")))?;
        Timestamp::new(instant).map_err(serde::de::Error::custom)
    }
}
