//! CSV loading.
//!
//! Comma-separated, UTF-8, header row required. The first column is taken as
//! date labels when any of its cells is not a number; every other cell must
//! parse as a finite number.

use std::path::Path;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    /// Labels from a non-numeric first column, one per row.
    pub labels: Option<Vec<String>>,
    /// Numeric columns keyed by position in `headers`.
    columns: Vec<Option<Vec<f64>>>,
    pub rows: usize,
}

impl Table {
    pub fn column(&self, name: &str) -> Result<&[f64], CliError> {
        let idx = self
            .headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Config(format!("no column named {name:?} (have {})", self.headers.join(", "))))?;
        self.columns[idx]
            .as_deref()
            .ok_or_else(|| CliError::Config(format!("column {name:?} holds labels, not numbers")))
    }

    pub fn label(&self, row: usize) -> Option<&str> {
        self.labels.as_ref().map(|l| l[row].as_str())
    }
}

pub fn read_table(path: &Path) -> Result<Table, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::Csv(format!("{}: {e}", path.display())))?;
    parse_table(file)
}

pub fn parse_table<R: std::io::Read>(source: R) -> Result<Table, CliError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(source);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Csv(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(CliError::Csv("missing header row".into()));
    }
    let mut raw: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Csv(e.to_string()))?;
        if record.len() != headers.len() {
            return Err(CliError::Csv(format!(
                "row {} has {} fields, header has {}",
                i + 1,
                record.len(),
                headers.len()
            )));
        }
        for (col, field) in raw.iter_mut().zip(record.iter()) {
            col.push(field.to_owned());
        }
    }
    let rows = raw[0].len();
    if rows == 0 {
        return Err(CliError::Csv("no data rows".into()));
    }

    let numeric = |cells: &[String]| cells.iter().map(|c| c.parse::<f64>().ok().filter(|v| v.is_finite())).collect::<Option<Vec<f64>>>();
    let mut labels = None;
    let mut columns = Vec::with_capacity(headers.len());
    for (j, cells) in raw.iter().enumerate() {
        match numeric(cells) {
            Some(values) => columns.push(Some(values)),
            None if j == 0 => {
                labels = Some(cells.clone());
                columns.push(None);
            }
            None => {
                let row = cells
                    .iter()
                    .position(|c| !c.parse::<f64>().is_ok_and(f64::is_finite))
                    .expect("a cell failed to parse");
                return Err(CliError::Csv(format!(
                    "column {:?}, row {}: {:?} is not a finite number",
                    headers[j],
                    row + 1,
                    cells[row]
                )));
            }
        }
    }
    if columns.iter().all(Option::is_none) {
        return Err(CliError::Csv("no numeric columns".into()));
    }
    Ok(Table {
        headers,
        labels,
        columns,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_table() {
        let t = parse_table("a,b\n1,2\n3,4.5\n".as_bytes()).unwrap();
        assert_eq!(t.rows, 2);
        assert_eq!(t.column("b").unwrap(), &[2.0, 4.5]);
        assert!(t.labels.is_none());
    }

    #[test]
    fn date_column_is_detected() {
        let t = parse_table("date,y\n2001Q1,1\n2001Q2,2\n".as_bytes()).unwrap();
        assert_eq!(t.label(1), Some("2001Q2"));
        assert!(matches!(t.column("date"), Err(CliError::Config(_))));
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(parse_table("y\n".as_bytes()), Err(CliError::Csv(_))));
        assert!(matches!(parse_table("".as_bytes()), Err(CliError::Csv(_))));
        assert!(matches!(parse_table("d,y\n1,x\n".as_bytes()), Err(CliError::Csv(_))));
        assert!(matches!(parse_table("y,x\n1,2\n3\n".as_bytes()), Err(CliError::Csv(_))));
        assert!(matches!(parse_table("y\nNaN\n".as_bytes()), Err(CliError::Csv(_))));
    }
}
