//! Engineered features and per-variant feature matrices.

mod calendar;
mod engineer;
mod ops;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Area, ColumnKind, ColumnMeta, Group, Origin, Series, TimeTable, Timestamp};
use crate::error::{Error, Result};

pub use calendar::{calendar_features, ZoneRule};
pub use engineer::{
    engineer, engineered_manifest, forecast_error_name, ramp_name, EngineeringConfig,
    FlowBalanceSpec, ForecastErrorSpec, IgccSpec, UnscheduledFlowSpec, UNSCHEDULED_FLOW,
};
pub use ops::{
    aggregate_igcc, flow_balance, forecast_error, ramp, upsample, CoarseSeries, UpsampleMode,
};

/// Column-major feature matrix aligned to a timestamp index. Models and
/// explanations index into `names` by position.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    index: Vec<Timestamp>,
    names: Vec<String>,
    columns: Vec<Series>,
}

impl FeatureMatrix {
    pub fn new(index: Vec<Timestamp>, names: Vec<String>, columns: Vec<Series>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::LengthMismatch(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        if let Some((name, col)) = names
            .iter()
            .zip(&columns)
            .find(|(_, c)| c.len() != index.len())
        {
            return Err(Error::LengthMismatch(format!(
                "feature {name:?} has {} rows, index has {}",
                col.len(),
                index.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::DuplicateColumn(dup.clone()));
        }
        Ok(FeatureMatrix {
            index,
            names,
            columns,
        })
    }

    /// Builds a matrix from plain rows; `NaN` entries become missing.
    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let start = Timestamp::from_ymd_hm(2000, 1, 1, 0, 0)?;
        let index = crate::dataset::regular_index(start, rows.len());
        let mut columns = vec![Vec::with_capacity(rows.len()); names.len()];
        for row in rows {
            if row.len() != names.len() {
                return Err(Error::LengthMismatch(format!(
                    "row with {} values for {} features",
                    row.len(),
                    names.len()
                )));
            }
            for (c, v) in row.iter().enumerate() {
                columns[c].push(if v.is_nan() { None } else { Some(*v) });
            }
        }
        Self::new(index, names, columns)
    }

    pub fn index(&self) -> &[Timestamp] {
        &self.index
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn columns(&self) -> &[Series] {
        &self.columns
    }

    pub fn num_rows(&self) -> usize {
        self.index.len()
    }

    pub fn num_features(&self) -> usize {
        self.names.len()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Result<&Series> {
        self.position(name)
            .map(|i| &self.columns[i])
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn row(&self, i: usize) -> Vec<Option<f64>> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    /// Sub-matrix of the given rows, in the given order.
    pub fn take_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            index: rows.iter().map(|&r| self.index[r]).collect(),
            names: self.names.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&r| c[r]).collect())
                .collect(),
        }
    }

    /// Same rows with columns reordered to `names`.
    pub fn reorder(&self, names: &[String]) -> Result<FeatureMatrix> {
        let columns = names
            .iter()
            .map(|n| self.column(n).cloned())
            .collect::<Result<Vec<_>>>()?;
        FeatureMatrix::new(self.index.clone(), names.to_vec(), columns)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantName {
    DailyProfile,
    DayAhead,
    DayAheadIgcc,
    Extended,
    Full,
}

impl VariantName {
    pub const ALL: [VariantName; 5] = [
        VariantName::DailyProfile,
        VariantName::DayAhead,
        VariantName::DayAheadIgcc,
        VariantName::Extended,
        VariantName::Full,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VariantName::DailyProfile => "daily_profile",
            VariantName::DayAhead => "day_ahead",
            VariantName::DayAheadIgcc => "day_ahead_igcc",
            VariantName::Extended => "extended",
            VariantName::Full => "full",
        }
    }
}

impl fmt::Display for VariantName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VariantName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        VariantName::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model variant {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    AfrrPos,
    AfrrNeg,
}

impl Target {
    pub fn column(self) -> &'static str {
        match self {
            Target::AfrrPos => "afrr_pos",
            Target::AfrrNeg => "afrr_neg",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column())
    }
}

impl FromStr for Target {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "afrr_pos" => Ok(Target::AfrrPos),
            "afrr_neg" => Ok(Target::AfrrNeg),
            _ => Err(Error::InvalidArgument(format!("unknown target {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelVariant {
    pub name: VariantName,
    pub target: Target,
}

/// Which variants may see a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tier {
    DayAhead,
    Igcc,
    Extended,
    Full,
}

fn tier(table: &TimeTable, meta: &ColumnMeta, depth: usize) -> Option<Tier> {
    match meta.kind {
        ColumnKind::Target | ColumnKind::Benchmark => None,
        ColumnKind::Calendar => Some(Tier::DayAhead),
        ColumnKind::DayAhead => Some(match meta.area {
            Area::De => Tier::DayAhead,
            Area::IgccOther => Tier::Igcc,
        }),
        ColumnKind::Actual => Some(match (meta.area, meta.group) {
            (Area::De, Some(Group::Load | Group::Renewable | Group::Flow)) => Tier::Extended,
            _ => Tier::Full,
        }),
        ColumnKind::Engineered => match &meta.origin {
            Some(Origin::Ramp { of }) if depth < 4 => table
                .meta(of)
                .ok()
                .and_then(|m| tier(table, m, depth + 1))
                .or(Some(Tier::Full)),
            Some(Origin::ForecastError { .. } | Origin::UnscheduledFlow { .. }) => {
                Some(Tier::Extended)
            }
            _ => Some(Tier::Full),
        },
    }
}

/// Selects the feature columns of `variant`, in table order.
///
/// * `day_ahead`: German day-ahead and calendar columns and their ramps.
/// * `day_ahead_igcc`: `day_ahead` plus the IGCC day-ahead aggregates.
/// * `extended`: `day_ahead` plus actual load, renewable generation and
///   flows, and every forecast-error / unscheduled-flow column.
/// * `full`: every feature column.
/// * `daily_profile`: no columns.
pub fn select_variant(table: &TimeTable, variant: ModelVariant) -> Result<FeatureMatrix> {
    let allowed: &[Tier] = match variant.name {
        VariantName::DailyProfile => &[],
        VariantName::DayAhead => &[Tier::DayAhead],
        VariantName::DayAheadIgcc => &[Tier::DayAhead, Tier::Igcc],
        VariantName::Extended => &[Tier::DayAhead, Tier::Extended],
        VariantName::Full => &[Tier::DayAhead, Tier::Igcc, Tier::Extended, Tier::Full],
    };
    let mut names = Vec::new();
    let mut columns = Vec::new();
    // only source columns count: calendar and derived columns alone do not
    let has_class = |needed: Tier| {
        table.metas().iter().any(|m| {
            matches!(m.kind, ColumnKind::DayAhead | ColumnKind::Actual)
                && tier(table, m, 0) == Some(needed)
        })
    };
    let required: &[(Tier, &str)] = match variant.name {
        VariantName::DailyProfile => &[],
        VariantName::DayAhead => &[(Tier::DayAhead, "German day-ahead")],
        VariantName::DayAheadIgcc => &[
            (Tier::DayAhead, "German day-ahead"),
            (Tier::Igcc, "IGCC day-ahead"),
        ],
        VariantName::Extended => &[
            (Tier::DayAhead, "German day-ahead"),
            (Tier::Extended, "actual load/renewable/flow"),
        ],
        VariantName::Full => &[
            (Tier::DayAhead, "German day-ahead"),
            (Tier::Full, "actual dispatchable generation"),
        ],
    };
    for (needed, class) in required {
        if !has_class(*needed) {
            return Err(Error::MissingFeatureClass {
                variant: variant.name.to_string(),
                class: class.to_string(),
            });
        }
    }
    for (meta, series) in table.iter() {
        if let Some(t) = tier(table, meta, 0) {
            if allowed.contains(&t) {
                names.push(meta.name.clone());
                columns.push(series.clone());
            }
        }
    }
    FeatureMatrix::new(table.index().to_vec(), names, columns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{regular_index, Manifest, ManifestColumn};

    fn meta(name: &str, kind: ColumnKind) -> ColumnMeta {
        ColumnMeta::new(name, "GW", kind)
    }

    fn fixture() -> (TimeTable, Manifest) {
        let idx = regular_index(Timestamp::from_ymd_hm(2021, 7, 14, 0, 0).unwrap(), 8);
        let cols = vec![
            meta("load_day_ahead", ColumnKind::DayAhead).with_group(Group::Load),
            meta("load", ColumnKind::Actual).with_group(Group::Load),
            meta("solar_day_ahead", ColumnKind::DayAhead).with_group(Group::Renewable),
            meta("solar", ColumnKind::Actual).with_group(Group::Renewable),
            meta("hydro generation (actual)", ColumnKind::Actual).with_group(Group::Dispatchable),
            meta("igcc_load_day_ahead", ColumnKind::DayAhead)
                .with_area(Area::IgccOther)
                .with_group(Group::Load),
            meta("afrr_pos", ColumnKind::Target),
        ];
        let data: Vec<(ColumnMeta, Series)> = cols
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), (0..8).map(|t| Some((i * 10 + t) as f64)).collect()))
            .collect();
        let table = TimeTable::new(idx, data).unwrap();
        let mut manifest = Manifest::new(cols);
        manifest.engineering.forecast_errors = vec![
            ForecastErrorSpec {
                base: "load".into(),
                forecast: "load_day_ahead".into(),
                actual: "load".into(),
            },
            ForecastErrorSpec {
                base: "solar".into(),
                forecast: "solar_day_ahead".into(),
                actual: "solar".into(),
            },
        ];
        manifest.engineering.zone = ZoneRule::Utc;
        (table, manifest)
    }

    fn names(table: &TimeTable, v: VariantName) -> Vec<String> {
        select_variant(
            table,
            ModelVariant {
                name: v,
                target: Target::AfrrPos,
            },
        )
        .unwrap()
        .names()
        .to_vec()
    }

    #[test]
    fn engineered_columns_named() {
        let (table, manifest) = fixture();
        let eng = engineer(&table, &manifest).unwrap();
        for name in [
            "forecast error load",
            "forecast error solar",
            "load ramp",
            "hydro generation (actual) ramp",
            "hour",
            "weekday",
            "month",
        ] {
            assert!(eng.contains(name), "missing {name}");
        }
        assert!(!eng.contains("afrr_pos ramp"));
        assert!(!eng.contains("forecast error load ramp"));
        assert_eq!(eng.column("forecast error load").unwrap()[0], Some(-10.0));
    }

    #[test]
    fn variant_membership() {
        let (table, manifest) = fixture();
        let eng = engineer(&table, &manifest).unwrap();
        assert!(names(&eng, VariantName::DailyProfile).is_empty());

        let da = names(&eng, VariantName::DayAhead);
        assert!(da.contains(&"load_day_ahead".to_string()));
        assert!(da.contains(&"load_day_ahead ramp".to_string()));
        assert!(da.contains(&"hour".to_string()));
        assert!(!da.contains(&"load".to_string()));
        assert!(!da.contains(&"igcc_load_day_ahead".to_string()));

        let igcc = names(&eng, VariantName::DayAheadIgcc);
        assert!(igcc.contains(&"igcc_load_day_ahead".to_string()));

        let ext = names(&eng, VariantName::Extended);
        assert!(ext.contains(&"forecast error solar".to_string()));
        assert!(ext.contains(&"load ramp".to_string()));
        assert!(!ext.contains(&"hydro generation (actual)".to_string()));
        assert!(!ext.contains(&"hydro generation (actual) ramp".to_string()));

        let full = names(&eng, VariantName::Full);
        assert!(full.contains(&"hydro generation (actual)".to_string()));
        assert!(!full.contains(&"afrr_pos".to_string()));
        assert_eq!(full.len(), eng.num_columns() - 1);

        for n in &da {
            assert!(igcc.contains(n) && ext.contains(n));
        }
        for n in &ext {
            assert!(full.contains(n));
        }
    }

    #[test]
    fn missing_class_is_named() {
        let (table, _) = fixture();
        let t = table
            .without_columns(&["hydro generation (actual)".to_string()])
            .unwrap();
        let err = select_variant(
            &t,
            ModelVariant {
                name: VariantName::Full,
                target: Target::AfrrNeg,
            },
        )
        .unwrap_err();
        assert!(err.to_string().contains("dispatchable"), "{err}");
    }

    #[test]
    fn upsampling_applied_from_manifest() {
        let idx = regular_index(Timestamp::from_ymd_hm(2021, 7, 14, 0, 0).unwrap(), 8);
        let m = meta("price_day_ahead", ColumnKind::DayAhead)
            .with_group(Group::Price)
            .with_resolution(60);
        let raw = vec![Some(1.0), None, None, None, Some(5.0), None, None, None];
        let table = TimeTable::new(idx, vec![(m.clone(), raw)]).unwrap();
        let mut col = ManifestColumn::new(m);
        col.upsample = Some(UpsampleMode::Linear);
        let mut manifest = Manifest::new(vec![]);
        manifest.columns.push(col);
        manifest.engineering.calendar = false;
        let eng = engineer(&table, &manifest).unwrap();
        let expected: Series = [1.0, 2.0, 3.0, 4.0, 5.0, 5.0, 5.0, 5.0]
            .into_iter()
            .map(Some)
            .collect();
        assert_eq!(eng.column("price_day_ahead").unwrap(), &expected);
    }

    #[test]
    fn flow_balance_and_igcc_consume_inputs() {
        let idx = regular_index(Timestamp::from_ymd_hm(2021, 7, 14, 0, 0).unwrap(), 2);
        let cols = vec![
            (meta("flow_at_de", ColumnKind::Actual), vec![Some(2.0), Some(1.0)]),
            (meta("flow_de_at", ColumnKind::Actual), vec![Some(1.0), Some(3.0)]),
            (meta("load_at_da", ColumnKind::DayAhead), vec![Some(5.0), Some(5.0)]),
            (meta("load_fr_da", ColumnKind::DayAhead), vec![Some(7.0), None]),
        ];
        let table = TimeTable::new(idx, cols).unwrap();
        let mut manifest = Manifest::new(vec![]);
        manifest.engineering.calendar = false;
        manifest.engineering.ramps = false;
        manifest.engineering.flow_balances.push(FlowBalanceSpec {
            name: "physical flow".into(),
            kind: ColumnKind::Actual,
            inflows: vec!["flow_at_de".into()],
            outflows: vec!["flow_de_at".into()],
        });
        manifest.engineering.igcc.push(IgccSpec {
            name: "igcc load day ahead".into(),
            group: Some(Group::Load),
            inputs: [("AT", "load_at_da"), ("FR", "load_fr_da")]
                .into_iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
        });
        let eng = engineer(&table, &manifest).unwrap();
        assert_eq!(eng.num_columns(), 2);
        assert_eq!(eng.column("physical flow").unwrap(), &vec![Some(1.0), Some(-2.0)]);
        assert_eq!(eng.column("igcc load day ahead").unwrap(), &vec![Some(12.0), None]);
        assert_eq!(eng.meta("igcc load day ahead").unwrap().area, Area::IgccOther);
    }

    #[test]
    fn matrix_reorder_and_rows() {
        let m = FeatureMatrix::from_rows(
            vec!["a".into(), "b".into()],
            &[vec![1.0, f64::NAN], vec![3.0, 4.0]],
        )
        .unwrap();
        assert_eq!(m.row(0), vec![Some(1.0), None]);
        let r = m.reorder(&["b".into(), "a".into()]).unwrap();
        assert_eq!(r.row(1), vec![Some(4.0), Some(3.0)]);
        assert_eq!(m.take_rows(&[1]).row(0), vec![Some(3.0), Some(4.0)]);
        assert!(m.reorder(&["c".into()]).is_err());
    }
}
