use serde::Serialize;

use super::{ColumnKind, Manifest, TimeTable};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "finding", rename_all = "snake_case")]
pub enum Finding {
    MissingColumn {
        name: String,
    },
    UnitMismatch {
        name: String,
        expected: String,
        found: String,
    },
    KindMismatch {
        name: String,
        expected: ColumnKind,
        found: ColumnKind,
    },
    /// Warning: the column has missing entries.
    MissingValues {
        name: String,
        fraction: f64,
    },
}

impl Finding {
    pub fn is_warning(&self) -> bool {
        matches!(self, Finding::MissingValues { .. })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
    /// Missing-value fraction of every manifest column present in the table.
    pub missing_fraction: Vec<(String, f64)>,
}

impl ValidationReport {
    /// True when there are no findings other than warnings.
    pub fn is_ok(&self) -> bool {
        self.findings.iter().all(Finding::is_warning)
    }
}

/// Compares a table with a manifest. Never fails; problems are reported as
/// findings.
pub fn validate_schema(table: &TimeTable, manifest: &Manifest) -> ValidationReport {
    let mut report = ValidationReport::default();
    for col in &manifest.columns {
        let name = &col.meta.name;
        let Ok(meta) = table.meta(name) else {
            report.findings.push(Finding::MissingColumn { name: name.clone() });
            continue;
        };
        if meta.unit != col.meta.unit {
            report.findings.push(Finding::UnitMismatch {
                name: name.clone(),
                expected: col.meta.unit.clone(),
                found: meta.unit.clone(),
            });
        }
        if meta.kind != col.meta.kind {
            report.findings.push(Finding::KindMismatch {
                name: name.clone(),
                expected: col.meta.kind,
                found: meta.kind,
            });
        }
        let fraction = table.missing_fraction(name).unwrap_or(0.0);
        if fraction > 0.0 {
            report.findings.push(Finding::MissingValues {
                name: name.clone(),
                fraction,
            });
        }
        report.missing_fraction.push((name.clone(), fraction));
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{regular_index, ColumnMeta, Timestamp};

    fn table(values: Vec<Option<f64>>) -> TimeTable {
        let idx = regular_index(Timestamp::from_ymd_hm(2020, 1, 1, 0, 0).unwrap(), values.len());
        TimeTable::new(
            idx,
            vec![(ColumnMeta::new("load", "GW", ColumnKind::Actual), values)],
        )
        .unwrap()
    }

    #[test]
    fn matching_table_has_no_findings() {
        let m = Manifest::new(vec![ColumnMeta::new("load", "GW", ColumnKind::Actual)]);
        let r = validate_schema(&table(vec![Some(1.0); 4]), &m);
        assert!(r.findings.is_empty());
        assert_eq!(r.missing_fraction, vec![("load".to_string(), 0.0)]);
    }

    #[test]
    fn missing_column_is_named() {
        let m = Manifest::new(vec![
            ColumnMeta::new("load", "GW", ColumnKind::Actual),
            ColumnMeta::new("load_day_ahead", "GW", ColumnKind::DayAhead),
        ]);
        let r = validate_schema(&table(vec![Some(1.0); 4]), &m);
        assert_eq!(
            r.findings,
            vec![Finding::MissingColumn {
                name: "load_day_ahead".into()
            }]
        );
        assert!(!r.is_ok());
    }

    #[test]
    fn missing_fraction_warning() {
        let m = Manifest::new(vec![ColumnMeta::new("load", "GW", ColumnKind::Actual)]);
        let mut values = vec![Some(1.0); 10];
        for v in values.iter_mut().take(3) {
            *v = None;
        }
        let r = validate_schema(&table(values), &m);
        match &r.findings[..] {
            [Finding::MissingValues { name, fraction }] => {
                assert_eq!(name, "load");
                assert!((fraction - 0.30).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(r.is_ok());
    }

    #[test]
    fn unit_and_kind_mismatch() {
        let m = Manifest::new(vec![ColumnMeta::new("load", "MW", ColumnKind::DayAhead)]);
        let r = validate_schema(&table(vec![Some(1.0)]), &m);
        assert_eq!(r.findings.len(), 2);
    }
}
