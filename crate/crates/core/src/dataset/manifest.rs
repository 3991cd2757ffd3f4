use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ColumnMeta;
use crate::error::{Error, Result};
use crate::features::{EngineeringConfig, UpsampleMode};

/// Schema description for a CSV table: expected columns with their metadata
/// plus the feature-engineering recipe applied by the `features` step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// Header of the timestamp column; the first column when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp_column: Option<String>,
    /// Columns whose values are negated at ingest (signed published targets).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sign_flip: Vec<String>,
    pub columns: Vec<ManifestColumn>,
    #[serde(default)]
    pub engineering: EngineeringConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestColumn {
    #[serde(flatten)]
    pub meta: ColumnMeta,
    /// Unit of the values in the file when it differs from `unit`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_unit: Option<String>,
    /// Upsampling applied by feature engineering to coarse-resolution columns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upsample: Option<UpsampleMode>,
    /// Whether feature engineering builds a ramp for this column.
    #[serde(default = "yes")]
    pub ramp: bool,
}

fn yes() -> bool {
    true
}

impl ManifestColumn {
    pub fn new(meta: ColumnMeta) -> Self {
        ManifestColumn {
            meta,
            source_unit: None,
            upsample: None,
            ramp: true,
        }
    }
}

impl Manifest {
    pub fn new(columns: Vec<ColumnMeta>) -> Self {
        Manifest {
            timestamp_column: None,
            sign_flip: Vec::new(),
            columns: columns.into_iter().map(ManifestColumn::new).collect(),
            engineering: EngineeringConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let manifest: Manifest =
            toml::from_str(text).map_err(|e| Error::Schema(format!("manifest: {e}")))?;
        manifest.check()?;
        Ok(manifest)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Schema(msg) => Error::Schema(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Schema(format!("manifest: {e}")))
    }

    pub fn column(&self, name: &str) -> Option<&ManifestColumn> {
        self.columns.iter().find(|c| c.meta.name == name)
    }

    fn check(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for col in &self.columns {
            if !seen.insert(col.meta.name.as_str()) {
                return Err(Error::DuplicateColumn(col.meta.name.clone()));
            }
            if let Some(src) = &col.source_unit {
                Unit::conversion(src, &col.meta.unit)?;
            }
        }
        for name in &self.sign_flip {
            if !seen.contains(name.as_str()) {
                return Err(Error::UnknownColumn(name.clone()));
            }
        }
        Ok(())
    }
}

/// Power and energy unit conversion used to normalize columns at ingest.
pub struct Unit;

impl Unit {
    fn power_exponent(unit: &str) -> Option<i32> {
        match unit {
            "W" => Some(0),
            "kW" => Some(3),
            "MW" => Some(6),
            "GW" => Some(9),
            "Wh" => Some(100),
            "kWh" => Some(103),
            "MWh" => Some(106),
            "GWh" => Some(109),
            _ => None,
        }
    }

    /// Multiplicative factor converting values in `from` to `to`.
    pub fn conversion(from: &str, to: &str) -> Result<f64> {
        if from == to {
            return Ok(1.0);
        }
        match (Self::power_exponent(from), Self::power_exponent(to)) {
            (Some(a), Some(b)) if (a >= 100) == (b >= 100) => Ok(10f64.powi(a - b)),
            _ => Err(Error::Schema(format!("cannot convert unit {from} to {to}"))),
        }
    }
}
