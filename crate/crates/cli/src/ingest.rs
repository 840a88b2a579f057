//! CSV input.

use std::fs::File;
use std::path::Path;

use mcorr_core::DataMatrix;

use crate::error::CliError;

/// Reads a rectangular numeric table with one observation per row.
///
/// Rows are numbered from 1, not counting the header. Any cell that does not
/// parse as a finite number rejects the whole file.
pub fn ingest_csv(path: &Path, has_header: bool) -> Result<DataMatrix, CliError> {
    let file = File::open(path).map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    let mut reader =
        csv::ReaderBuilder::new().has_headers(has_header).flexible(true).trim(csv::Trim::All).from_reader(file);

    let names: Option<Vec<String>> = if has_header {
        let h = reader.headers().map_err(|e| CliError::Data(format!("cannot read header: {e}")))?;
        Some(h.iter().map(str::to_owned).collect())
    } else {
        None
    };

    let mut width = names.as_ref().map(Vec::len);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| CliError::Data(format!("row {row}: {e}")))?;
        let p = *width.get_or_insert(record.len());
        if record.len() != p {
            return Err(CliError::Data(format!("row {row} has {} fields, expected {p}", record.len())));
        }
        let mut values = Vec::with_capacity(p);
        for (j, cell) in record.iter().enumerate() {
            let v = cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                let col = match &names {
                    Some(n) => format!("column {} ({})", j + 1, n[j]),
                    None => format!("column {}", j + 1),
                };
                CliError::Data(format!("row {row}, {col}: {cell:?} is not a finite number"))
            })?;
            values.push(v);
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!("{} has no data rows", path.display())));
    }
    let data = DataMatrix::from_rows(&rows)?;
    match names {
        Some(n) => Ok(data.with_names(n)?),
        None => Ok(data),
    }
}
