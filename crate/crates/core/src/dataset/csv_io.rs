use std::io::{Read, Write};
use std::path::Path;

use chrono::Timelike;

use super::{Manifest, Series, TimeTable, Timestamp, Unit, SLOT_MINUTES};
use crate::error::{Error, Result};

/// Loads a CSV table and validates it against `manifest`.
///
/// Rows are numbered from 1 (the first data row after the header) in errors.
/// Empty cells become missing entries. Only manifest columns are kept, in
/// manifest order; values are converted from `source_unit` to `unit` and
/// negated for columns listed in `sign_flip`.
pub fn load_table(path: &Path, manifest: &Manifest) -> Result<TimeTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_table_csv(std::io::BufReader::new(file), manifest)
}

pub fn read_table_csv<R: Read>(reader: R, manifest: &Manifest) -> Result<TimeTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let ts_pos = match &manifest.timestamp_column {
        Some(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.clone()))?,
        None => 0,
    };
    let mut positions = Vec::with_capacity(manifest.columns.len());
    let mut scales = Vec::with_capacity(manifest.columns.len());
    for col in &manifest.columns {
        let pos = headers
            .iter()
            .position(|h| h == col.meta.name)
            .ok_or_else(|| Error::MissingColumn(col.meta.name.clone()))?;
        positions.push(pos);
        let mut scale = match &col.source_unit {
            Some(src) => Unit::conversion(src, &col.meta.unit)?,
            None => 1.0,
        };
        if manifest.sign_flip.contains(&col.meta.name) {
            scale = -scale;
        }
        scales.push(scale);
    }

    let mut index: Vec<Timestamp> = Vec::new();
    let mut data: Vec<Series> = vec![Vec::new(); manifest.columns.len()];
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let raw = record.get(ts_pos).unwrap_or("");
        let instant = Timestamp::parse(raw).ok_or_else(|| Error::TimestampParse {
            row,
            value: raw.to_string(),
        })?;
        if instant.minute() % 15 != 0 || instant.second() != 0 {
            return Err(Error::OffGrid {
                row,
                value: raw.to_string(),
            });
        }
        let ts = Timestamp::new(instant).expect("grid checked above");
        if let Some(prev) = index.last() {
            if ts.unix_minutes() - prev.unix_minutes() != SLOT_MINUTES {
                return Err(Error::NonMonotonic {
                    row,
                    value: raw.to_string(),
                });
            }
        }
        index.push(ts);
        for (c, (&pos, &scale)) in positions.iter().zip(&scales).enumerate() {
            let cell = record.get(pos).unwrap_or("");
            let value = if cell.is_empty() {
                None
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::ValueParse {
                    row,
                    column: manifest.columns[c].meta.name.clone(),
                    value: cell.to_string(),
                })?;
                if v.is_nan() {
                    None
                } else {
                    Some(v * scale)
                }
            };
            data[c].push(value);
        }
    }

    let columns = manifest
        .columns
        .iter()
        .map(|c| c.meta.clone())
        .zip(data)
        .collect();
    TimeTable::new(index, columns)
}

/// Writes a table in the ingest format: timestamp column first, empty cells
/// for missing entries, shortest round-trip float formatting.
pub fn write_table(path: &Path, table: &TimeTable) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_table_csv(&mut w, table)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_table_csv<W: Write>(writer: W, table: &TimeTable) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["timestamp".to_string()];
    header.extend(table.names().map(str::to_string));
    wtr.write_record(&header)?;
    let columns: Vec<&Series> = table.iter().map(|(_, s)| s).collect();
    let mut record = Vec::with_capacity(header.len());
    for (row, ts) in table.index().iter().enumerate() {
        record.clear();
        record.push(ts.to_string());
        for col in &columns {
            record.push(col[row].map(|v| v.to_string()).unwrap_or_default());
        }
        wtr.write_record(&record)?;
    }
    wtr.flush()
        .map_err(|e| Error::io(Path::new("<csv writer>"), e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ColumnKind, ColumnMeta};

    fn manifest() -> Manifest {
        Manifest::new(vec![
            ColumnMeta::new("load", "GW", ColumnKind::Actual),
            ColumnMeta::new("afrr_pos", "GW", ColumnKind::Target),
        ])
    }

    #[test]
    fn three_rows() {
        let csv = "timestamp,load,afrr_pos\n\
                   2021-07-14T00:00:00Z,50.5,0.2\n\
                   2021-07-14T00:15:00Z,,0.3\n\
                   2021-07-14T00:30:00Z,51,\n";
        let t = read_table_csv(csv.as_bytes(), &manifest()).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.column("load").unwrap(), &vec![Some(50.5), None, Some(51.0)]);
        assert_eq!(t.column("afrr_pos").unwrap()[2], None);
    }

    #[test]
    fn off_grid_reports_row() {
        let csv = "timestamp,load,afrr_pos\n\
                   2021-07-14T00:00:00Z,1,1\n\
                   2021-07-14T00:20:00Z,1,1\n";
        let err = read_table_csv(csv.as_bytes(), &manifest()).unwrap_err();
        assert!(matches!(err, Error::OffGrid { row: 2, .. }), "{err}");
    }

    #[test]
    fn non_monotonic_reports_row() {
        let csv = "timestamp,load,afrr_pos\n\
                   2021-07-14T00:15:00Z,1,1\n\
                   2021-07-14T00:30:00Z,1,1\n\
                   2021-07-14T00:00:00Z,1,1\n";
        let err = read_table_csv(csv.as_bytes(), &manifest()).unwrap_err();
        assert!(matches!(err, Error::NonMonotonic { row: 3, .. }), "{err}");
    }

    #[test]
    fn missing_manifest_column_is_named() {
        let csv = "timestamp,load\n2021-07-14T00:00:00Z,1\n";
        let err = read_table_csv(csv.as_bytes(), &manifest()).unwrap_err();
        match err {
            Error::MissingColumn(name) => assert_eq!(name, "afrr_pos"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn units_and_sign_flip_applied() {
        let mut m = Manifest::new(vec![ColumnMeta::new("afrr_neg", "GW", ColumnKind::Target)]);
        m.columns[0].source_unit = Some("MW".into());
        m.sign_flip = vec!["afrr_neg".into()];
        let csv = "timestamp,afrr_neg\n2021-07-14T00:00:00Z,-250\n";
        let t = read_table_csv(csv.as_bytes(), &m).unwrap();
        assert_eq!(t.column("afrr_neg").unwrap(), &vec![Some(0.25)]);
    }
}
