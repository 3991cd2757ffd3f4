use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::calendar::{calendar_features, ZoneRule};
use super::ops::{aggregate_igcc, flow_balance, forecast_error, ramp, upsample, CoarseSeries};
use crate::dataset::{
    Area, ColumnKind, ColumnMeta, Group, Manifest, Origin, Series, TimeTable,
};
use crate::error::{Error, Result};

/// Net-import balance built from per-neighbour flow columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowBalanceSpec {
    pub name: String,
    #[serde(default = "actual")]
    pub kind: ColumnKind,
    #[serde(default)]
    pub inflows: Vec<String>,
    #[serde(default)]
    pub outflows: Vec<String>,
}

/// Sum of one day-ahead feature type over the other IGCC members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IgccSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<Group>,
    /// Country code to column name.
    pub inputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastErrorSpec {
    /// Base name used in the output column "forecast error <base>".
    pub base: String,
    pub forecast: String,
    pub actual: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnscheduledFlowSpec {
    /// Total commercial exchange balance.
    pub total: String,
    /// Physical flow balance.
    pub physical: String,
}

/// Recipe turning a loaded table into the engineered feature table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineeringConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flow_balances: Vec<FlowBalanceSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub igcc: Vec<IgccSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub forecast_errors: Vec<ForecastErrorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unscheduled_flow: Option<UnscheduledFlowSpec>,
    #[serde(default = "yes")]
    pub ramps: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ramp_exclude: Vec<String>,
    #[serde(default = "yes")]
    pub calendar: bool,
    #[serde(default)]
    pub zone: ZoneRule,
    /// Drop per-neighbour and per-country input columns after aggregation.
    #[serde(default = "yes")]
    pub drop_inputs: bool,
}

fn yes() -> bool {
    true
}

fn actual() -> ColumnKind {
    ColumnKind::Actual
}

impl Default for EngineeringConfig {
    fn default() -> Self {
        EngineeringConfig {
            flow_balances: Vec::new(),
            igcc: Vec::new(),
            forecast_errors: Vec::new(),
            unscheduled_flow: None,
            ramps: true,
            ramp_exclude: Vec::new(),
            calendar: true,
            zone: ZoneRule::default(),
            drop_inputs: true,
        }
    }
}

pub fn ramp_name(base: &str) -> String {
    format!("{base} ramp")
}

pub fn forecast_error_name(base: &str) -> String {
    format!("forecast error {base}")
}

pub const UNSCHEDULED_FLOW: &str = "unscheduled flow";

fn upsampled(table: &TimeTable, meta: &ColumnMeta, mode: super::UpsampleMode) -> Result<Series> {
    let factor = (meta.native_resolution / 15) as usize;
    let series = table.column(&meta.name)?;
    if factor <= 1 {
        return Ok(series.clone());
    }
    let first = table.index().first().map(|t| t.unix_minutes()).unwrap_or(0);
    if first.rem_euclid(meta.native_resolution as i64) != 0 {
        return Err(Error::InvalidArgument(format!(
            "column {:?}: index does not start on a {}-minute boundary",
            meta.name, meta.native_resolution
        )));
    }
    let anchors: Series = series.iter().step_by(factor).copied().collect();
    let mut out = upsample(
        &CoarseSeries {
            values: anchors,
            resolution_minutes: meta.native_resolution,
        },
        factor,
        mode,
    )?;
    out.truncate(series.len());
    Ok(out)
}

/// Applies the manifest's engineering recipe: upsampling of coarse columns,
/// flow balances, IGCC aggregates, forecast errors, unscheduled flow, ramps
/// and calendar columns. Appended columns follow the input columns in that
/// order.
pub fn engineer(table: &TimeTable, manifest: &Manifest) -> Result<TimeTable> {
    let cfg = &manifest.engineering;
    let len = table.len();

    let mut table = table.clone();
    for col in &manifest.columns {
        if let Some(mode) = col.upsample {
            if table.contains(&col.meta.name) && col.meta.native_resolution > 15 {
                let meta = table.meta(&col.meta.name)?.clone();
                let series = upsampled(&table, &meta, mode)?;
                table = table.with_replaced(meta, series)?;
            }
        }
    }

    let mut added: Vec<(ColumnMeta, Series)> = Vec::new();
    let mut consumed: Vec<String> = Vec::new();

    for spec in &cfg.flow_balances {
        let inflows = spec
            .inflows
            .iter()
            .map(|n| table.column(n))
            .collect::<Result<Vec<_>>>()?;
        let outflows = spec
            .outflows
            .iter()
            .map(|n| table.column(n))
            .collect::<Result<Vec<_>>>()?;
        let series = flow_balance(&inflows, &outflows, len)?;
        let inputs: Vec<&String> = spec.inflows.iter().chain(&spec.outflows).collect();
        let unit = match inputs.first() {
            Some(n) => table.meta(n)?.unit.clone(),
            None => "GW".to_string(),
        };
        let resolution = inputs
            .iter()
            .map(|n| table.meta(n).map(|m| m.native_resolution))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .max()
            .unwrap_or(15);
        let meta = ColumnMeta::new(&spec.name, unit, spec.kind)
            .with_group(Group::Flow)
            .with_resolution(resolution);
        added.push((meta, series));
        consumed.extend(inputs.into_iter().cloned());
    }

    for spec in &cfg.igcc {
        let inputs = spec
            .inputs
            .iter()
            .map(|(country, col)| Ok((country.as_str(), table.column(col)?)))
            .collect::<Result<Vec<_>>>()?;
        let series = aggregate_igcc(&inputs)?;
        let first = spec.inputs.values().next().expect("non-empty after aggregation");
        let src = table.meta(first)?;
        let mut meta = ColumnMeta::new(&spec.name, src.unit.clone(), ColumnKind::DayAhead)
            .with_area(Area::IgccOther)
            .with_resolution(src.native_resolution);
        meta.group = spec.group.or(src.group);
        added.push((meta, series));
        consumed.extend(spec.inputs.values().cloned());
    }

    let lookup = |name: &str, added: &[(ColumnMeta, Series)]| -> Result<(ColumnMeta, Series)> {
        if let Some((m, s)) = added.iter().find(|(m, _)| m.name == name) {
            return Ok((m.clone(), s.clone()));
        }
        Ok((table.meta(name)?.clone(), table.column(name)?.clone()))
    };

    let mut errors: Vec<(ColumnMeta, Series)> = Vec::new();
    for spec in &cfg.forecast_errors {
        let (fmeta, f) = lookup(&spec.forecast, &added)?;
        let (ameta, a) = lookup(&spec.actual, &added)?;
        let mut meta = ColumnMeta::new(
            forecast_error_name(&spec.base),
            fmeta.unit.clone(),
            ColumnKind::Engineered,
        )
        .with_origin(Origin::ForecastError {
            forecast: spec.forecast.clone(),
            actual: spec.actual.clone(),
        });
        meta.group = ameta.group.or(fmeta.group);
        errors.push((meta, forecast_error(&f, &a)?));
    }
    if let Some(spec) = &cfg.unscheduled_flow {
        let (tmeta, total) = lookup(&spec.total, &added)?;
        let (_, physical) = lookup(&spec.physical, &added)?;
        let meta = ColumnMeta::new(UNSCHEDULED_FLOW, tmeta.unit.clone(), ColumnKind::Engineered)
            .with_group(Group::Flow)
            .with_origin(Origin::UnscheduledFlow {
                total: spec.total.clone(),
                physical: spec.physical.clone(),
            });
        errors.push((meta, forecast_error(&total, &physical)?));
    }
    added.extend(errors);

    let base = if cfg.drop_inputs && !consumed.is_empty() {
        table.without_columns(&consumed)?
    } else {
        table
    };
    let mut table = base.with_columns(added)?;

    if cfg.ramps {
        let mut ramps = Vec::new();
        for (meta, series) in table.iter() {
            let wanted = matches!(meta.kind, ColumnKind::DayAhead | ColumnKind::Actual)
                && !cfg.ramp_exclude.contains(&meta.name)
                && manifest.column(&meta.name).map(|c| c.ramp).unwrap_or(true);
            if wanted {
                let mut rmeta = ColumnMeta::new(
                    ramp_name(&meta.name),
                    meta.unit.clone(),
                    ColumnKind::Engineered,
                )
                .with_area(meta.area)
                .with_origin(Origin::Ramp {
                    of: meta.name.clone(),
                });
                rmeta.group = meta.group;
                ramps.push((rmeta, ramp(series)));
            }
        }
        table = table.with_columns(ramps)?;
    }

    if cfg.calendar {
        let cal = calendar_features(table.index(), cfg.zone);
        table = table.with_columns(cal)?;
    }
    Ok(table)
}

/// Manifest describing an engineered table, for writing next to it.
pub fn engineered_manifest(table: &TimeTable, source: &Manifest) -> Manifest {
    let columns = table
        .metas()
        .iter()
        .map(|m| {
            let mut col = crate::dataset::ManifestColumn::new(m.clone());
            col.ramp = false;
            col
        })
        .collect();
    Manifest {
        timestamp_column: None,
        sign_flip: Vec::new(),
        columns,
        engineering: EngineeringConfig {
            ramps: false,
            calendar: false,
            zone: source.engineering.zone,
            ..EngineeringConfig::default()
        },
    }
}
