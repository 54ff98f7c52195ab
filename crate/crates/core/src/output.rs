//! CSV writers for time series and study tables.

use std::path::Path;

use serde::Serialize;

use crate::diagnostics::DiagnosticsRecord;
use crate::error::Result;

/// One row per record; columns follow [`DiagnosticsRecord::header`].
pub fn write_diagnostics_csv(path: &Path, records: &[DiagnosticsRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if let Some(first) = records.first() {
        w.write_record(first.header())?;
    }
    for r in records {
        w.write_record(r.values().iter().map(|x| x.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Serializes a slice of rows with a header taken from the field names.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
