//! Strict CSV loading: header row, comma separator, no missing values, and
//! numeric cells in every referenced column.

use std::collections::HashMap;
use std::path::Path;

use resi::{Dataset, Matrix};

pub struct Table {
    pub header: Vec<String>,
    pub records: Vec<csv::StringRecord>,
}

/// Reads the whole file; errors name the line and column.
pub fn read_table(path: &Path) -> Result<Table, String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| format!("cannot open {}: {e}", path.display()))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| format!("{}: bad header: {e}", path.display()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(format!("{}: missing header row", path.display()));
    }
    let mut seen = HashMap::new();
    for (j, h) in header.iter().enumerate() {
        if h.is_empty() {
            return Err(format!("{}: column {} has an empty name", path.display(), j + 1));
        }
        if let Some(first) = seen.insert(h.as_str(), j) {
            return Err(format!(
                "{}: duplicate column `{h}` (columns {} and {})",
                path.display(),
                first + 1,
                j + 1
            ));
        }
    }
    let mut records = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { expected_len, len, pos } => format!(
                "{}: line {}: expected {expected_len} fields, found {len}",
                path.display(),
                pos.as_ref().map_or(i + 2, |p| p.line() as usize)
            ),
            _ => format!("{}: row {}: {e}", path.display(), i + 1),
        })?;
        for (j, cell) in rec.iter().enumerate() {
            if cell.trim().is_empty() {
                return Err(format!(
                    "{}: line {}: missing value in column `{}`",
                    path.display(),
                    i + 2,
                    header[j]
                ));
            }
        }
        records.push(rec);
    }
    if records.is_empty() {
        return Err(format!("{}: no data rows", path.display()));
    }
    Ok(Table { header, records })
}

impl Table {
    pub fn column(&self, name: &str) -> Result<Vec<f64>, String> {
        let j = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| format!("column `{name}` not found (available: {})", self.header.join(", ")))?;
        self.records
            .iter()
            .enumerate()
            .map(|(i, rec)| {
                let cell = rec[j].trim();
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(format!(
                        "line {}: non-numeric value `{cell}` in column `{name}`",
                        i + 2
                    )),
                }
            })
            .collect()
    }

    fn block(&self, names: &[String]) -> Result<Matrix<f64>, String> {
        let cols: Vec<Vec<f64>> = names.iter().map(|n| self.column(n)).collect::<Result<_, _>>()?;
        Ok(Matrix::from_fn(self.records.len(), names.len(), |i, j| cols[j][i]))
    }

    pub fn dataset(&self, outcome: &str, nuisance: &[String], target: &[String]) -> Result<Dataset<f64>, String> {
        let mut used = vec![outcome];
        for name in nuisance.iter().chain(target) {
            if used.contains(&name.as_str()) {
                return Err(format!("column `{name}` is used more than once"));
            }
            used.push(name);
        }
        let y = self.column(outcome)?;
        Dataset::new(
            y,
            self.block(nuisance)?,
            self.block(target)?,
            nuisance.to_vec(),
            target.to_vec(),
        )
        .map_err(|e| e.to_string())
    }
}
