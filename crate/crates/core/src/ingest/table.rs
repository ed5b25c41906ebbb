use std::collections::HashMap;

use csv::{ReaderBuilder, StringRecord, Trim};

use super::IngestError;

/// A parsed CSV file with named-column access and line-aware errors.
pub(crate) struct Table {
    pub file: String,
    columns: HashMap<String, usize>,
    pub rows: Vec<(u64, StringRecord)>,
}

impl Table {
    pub fn parse(file: &str, contents: &str, required: &[&str]) -> Result<Table, Vec<IngestError>> {
        let mut reader = ReaderBuilder::new().trim(Trim::All).from_reader(contents.as_bytes());
        let headers = reader.headers().map_err(|e| vec![csv_error(file, e)])?.clone();
        let columns: HashMap<String, usize> =
            headers.iter().enumerate().map(|(i, h)| (h.trim_start_matches('\u{feff}').to_string(), i)).collect();
        let missing: Vec<IngestError> = required
            .iter()
            .filter(|c| !columns.contains_key(**c))
            .map(|c| IngestError::MissingColumn { file: file.to_string(), column: c.to_string() })
            .collect();
        if !missing.is_empty() {
            return Err(missing);
        }
        let mut rows = Vec::new();
        let mut errors = Vec::new();
        for record in reader.records() {
            match record {
                Ok(r) => {
                    let line = r.position().map_or(0, |p| p.line());
                    if r.iter().all(str::is_empty) {
                        continue;
                    }
                    rows.push((line, r));
                }
                Err(e) => errors.push(csv_error(file, e)),
            }
        }
        if errors.is_empty() {
            Ok(Table { file: file.to_string(), columns, rows })
        } else {
            Err(errors)
        }
    }

    pub fn has_column(&self, column: &str) -> bool {
        self.columns.contains_key(column)
    }

    pub fn text<'a>(&self, line: u64, record: &'a StringRecord, column: &str) -> Result<&'a str, IngestError> {
        let value = self.columns.get(column).and_then(|&i| record.get(i)).unwrap_or("");
        if value.is_empty() {
            return Err(self.error(line, column, "empty value"));
        }
        Ok(value)
    }

    pub fn real(&self, line: u64, record: &StringRecord, column: &str) -> Result<f64, IngestError> {
        let text = self.text(line, record, column)?;
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.error(line, column, &format!("not a finite number: {text:?}"))),
        }
    }

    pub fn year(&self, line: u64, record: &StringRecord, column: &str) -> Result<i32, IngestError> {
        let text = self.text(line, record, column)?;
        text.parse::<i32>().map_err(|_| self.error(line, column, &format!("not an integer year: {text:?}")))
    }

    pub fn count(&self, line: u64, record: &StringRecord, column: &str) -> Result<u64, IngestError> {
        let text = self.text(line, record, column)?;
        text.parse::<u64>().map_err(|_| self.error(line, column, &format!("not a nonnegative integer: {text:?}")))
    }

    pub fn error(&self, line: u64, column: &str, reason: &str) -> IngestError {
        IngestError::Parse { file: self.file.clone(), line, column: column.to_string(), reason: reason.to_string() }
    }
}

fn csv_error(file: &str, e: csv::Error) -> IngestError {
    let line = e.position().map_or(0, |p| p.line());
    IngestError::Parse { file: file.to_string(), line, column: String::new(), reason: e.to_string() }
}
