//! Tabular data with explicit missingness, and CSV ingestion/export.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Marginal scale the response columns are expressed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Margin {
    #[default]
    Raw,
    Gumbel,
    Laplace,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Vec<Option<f64>>>,
    responses: Vec<String>,
    covariates: Vec<String>,
    margin: Margin,
}

impl Dataset {
    pub fn new(names: Vec<String>, columns: Vec<Vec<Option<f64>>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::invalid(format!("{} names for {} columns", names.len(), columns.len())));
        }
        if let Some(first) = columns.first() {
            if let Some((i, _)) = columns.iter().enumerate().find(|(_, c)| c.len() != first.len()) {
                return Err(Error::invalid(format!("column '{}' has a different length", names[i])));
            }
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::invalid(format!("duplicate column name '{dup}'")));
        }
        Ok(Self { names, columns, responses: Vec::new(), covariates: Vec::new(), margin: Margin::Raw })
    }

    /// Builds a dataset from fully observed columns.
    pub fn from_complete(names: &[&str], columns: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(
            names.iter().map(|s| s.to_string()).collect(),
            columns.into_iter().map(|c| c.into_iter().map(Some).collect()).collect(),
        )
    }

    pub fn with_roles(mut self, responses: &[&str], covariates: &[&str]) -> Result<Self> {
        for n in responses.iter().chain(covariates) {
            self.column_index(n)?;
        }
        self.responses = responses.iter().map(|s| s.to_string()).collect();
        self.covariates = covariates.iter().map(|s| s.to_string()).collect();
        Ok(self)
    }

    pub fn with_margin(mut self, margin: Margin) -> Self {
        self.margin = margin;
        self
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
    pub fn responses(&self) -> &[String] {
        &self.responses
    }
    pub fn covariates(&self) -> &[String] {
        &self.covariates
    }
    pub fn margin(&self) -> Margin {
        self.margin
    }
    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }
    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::invalid(format!("no column named '{name}'")))
    }

    pub fn column(&self, name: &str) -> Result<&[Option<f64>]> {
        Ok(&self.columns[self.column_index(name)?])
    }

    /// Column values, failing if any cell is missing.
    pub fn complete_column(&self, name: &str) -> Result<Vec<f64>> {
        self.column(name)?
            .iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| Error::invalid(format!("column '{name}' is missing at row {i}"))))
            .collect()
    }

    pub fn missing_cells(&self) -> usize {
        self.columns.iter().map(|c| c.iter().filter(|v| v.is_none()).count()).sum()
    }

    /// Rows with every listed column observed.
    pub fn complete_rows(&self, names: &[&str]) -> Result<Vec<usize>> {
        let cols = names.iter().map(|n| self.column(n)).collect::<Result<Vec<_>>>()?;
        Ok((0..self.n_rows()).filter(|&r| cols.iter().all(|c| c[r].is_some())).collect())
    }

    /// New dataset made of the given rows (repeats allowed), keeping roles.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| rows.iter().map(|&r| c[r]).collect()).collect(),
            responses: self.responses.clone(),
            covariates: self.covariates.clone(),
            margin: self.margin,
        }
    }

    pub fn push_column(&mut self, name: &str, values: Vec<Option<f64>>) -> Result<()> {
        if self.names.iter().any(|n| n == name) {
            return Err(Error::invalid(format!("duplicate column name '{name}'")));
        }
        if !self.columns.is_empty() && values.len() != self.n_rows() {
            return Err(Error::invalid(format!("column '{name}' has {} rows, expected {}", values.len(), self.n_rows())));
        }
        self.names.push(name.to_string());
        self.columns.push(values);
        Ok(())
    }
}

/// Column roles and margin tag applied at ingestion.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CsvSchema {
    #[serde(default)]
    pub responses: Vec<String>,
    #[serde(default)]
    pub covariates: Vec<String>,
    #[serde(default)]
    pub margin: Margin,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows: usize,
    pub missing_cells: usize,
    pub warnings: Vec<String>,
}

fn parse_cell(raw: &str, line: u64, column: &str) -> Result<Option<f64>> {
    let s = raw.trim();
    if s.is_empty() || s == "NA" {
        return Ok(None);
    }
    if s.eq_ignore_ascii_case("true") {
        return Ok(Some(1.0));
    }
    if s.eq_ignore_ascii_case("false") {
        return Ok(Some(0.0));
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Format(format!("line {line}, column '{column}': cannot parse '{s}'")))
}

pub fn ingest_reader(reader: impl Read, schema: &CsvSchema) -> Result<(Dataset, IngestReport)> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).has_headers(true).from_reader(reader);
    let names: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if names.is_empty() || (names.len() == 1 && names[0].is_empty()) {
        return Err(Error::Format("missing header row".into()));
    }
    let mut columns: Vec<Vec<Option<f64>>> = vec![Vec::new(); names.len()];
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != names.len() {
            return Err(Error::Format(format!(
                "line {line}: expected {} fields, found {}",
                names.len(),
                record.len()
            )));
        }
        for (j, cell) in record.iter().enumerate() {
            columns[j].push(parse_cell(cell, line, &names[j])?);
        }
    }
    let mut report = IngestReport::default();
    let mut ds = Dataset::new(names, columns)?;
    let responses: Vec<&str> = schema.responses.iter().map(String::as_str).collect();
    let covariates: Vec<&str> = schema.covariates.iter().map(String::as_str).collect();
    ds = ds.with_roles(&responses, &covariates)?.with_margin(schema.margin);
    report.rows = ds.n_rows();
    report.missing_cells = ds.missing_cells();
    if report.rows == 0 {
        report.warnings.push("file has a header but no data rows".into());
    }
    Ok((ds, report))
}

pub fn ingest_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<(Dataset, IngestReport)> {
    let file = std::fs::File::open(path.as_ref())?;
    ingest_reader(std::io::BufReader::new(file), schema)
}

/// Writes the dataset as CSV; missing cells become `NA`. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn export_writer(ds: &Dataset, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(&ds.names)?;
    let mut row = Vec::with_capacity(ds.n_cols());
    for r in 0..ds.n_rows() {
        row.clear();
        for c in &ds.columns {
            row.push(match c[r] {
                Some(v) => format!("{v}"),
                None => "NA".to_string(),
            });
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn export_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    export_writer(ds, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_missing_cell() {
        let (ds, report) = ingest_reader("a,b\n1,NA\n2,3.5\n".as_bytes(), &CsvSchema::default()).unwrap();
        assert_eq!(ds.n_rows(), 2);
        assert_eq!(report.missing_cells, 1);
        assert_eq!(ds.column("b").unwrap(), &[None, Some(3.5)]);
    }

    #[test]
    fn header_only_warns() {
        let (ds, report) = ingest_reader("a,b\n".as_bytes(), &CsvSchema::default()).unwrap();
        assert_eq!(ds.n_rows(), 0);
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn booleans_and_empty() {
        let (ds, _) = ingest_reader("flag,x\ntrue,\n0,1e-3\nFALSE,-2\n".as_bytes(), &CsvSchema::default()).unwrap();
        assert_eq!(ds.column("flag").unwrap(), &[Some(1.0), Some(0.0), Some(0.0)]);
        assert_eq!(ds.column("x").unwrap(), &[None, Some(1e-3), Some(-2.0)]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = ingest_reader("a,b\n1,2\n3\n".as_bytes(), &CsvSchema::default()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = ingest_reader("a,b\n1,2\n3,abc\n".as_bytes(), &CsvSchema::default()).unwrap_err();
        assert!(err.to_string().contains("line 3") && err.to_string().contains("abc"), "{err}");
    }

    #[test]
    fn round_trip_is_value_identical() {
        let ds = Dataset::new(
            vec!["y".into(), "x".into()],
            vec![vec![Some(0.1 + 0.2), None, Some(-1e-300)], vec![Some(std::f64::consts::PI), Some(2.0), None]],
        )
        .unwrap();
        let mut buf = Vec::new();
        export_writer(&ds, &mut buf).unwrap();
        let (back, _) = ingest_reader(buf.as_slice(), &CsvSchema::default()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn unknown_role_column_rejected() {
        let schema = CsvSchema { responses: vec!["zz".into()], ..Default::default() };
        assert!(ingest_reader("a\n1\n".as_bytes(), &schema).is_err());
    }
}
