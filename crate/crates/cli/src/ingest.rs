// SPDX-License-Identifier: MIT OR Apache-2.0

//! CSV ingestion: one numeric value column plus an optional label column.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Column given by header name or 1-based position.
#[derive(Debug, Clone)]
pub enum Selector {
    Name(String),
    Position(usize),
}

impl Selector {
    pub fn parse(s: &str) -> Selector {
        match s.parse::<usize>() {
            Ok(i) => Selector::Position(i),
            Err(_) => Selector::Name(s.to_string()),
        }
    }

    fn resolve(
        &self,
        headers: Option<&csv::StringRecord>,
        width: usize,
    ) -> Result<usize, CliError> {
        match self {
            Selector::Position(i) if *i >= 1 && *i <= width => Ok(i - 1),
            Selector::Position(i) => Err(CliError::Input(format!(
                "column {i} out of range: file has {width} columns"
            ))),
            Selector::Name(name) => headers
                .and_then(|h| h.iter().position(|c| c.trim() == name))
                .ok_or_else(|| CliError::Input(format!("no column named '{name}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DataFrameIn {
    pub values: Vec<f64>,
    pub index: Option<Vec<String>>,
    pub source: PathBuf,
    pub column: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub column: String,
    pub rows: usize,
    pub sha256: String,
}

impl DataFrameIn {
    pub fn digest(&self) -> InputDigest {
        InputDigest {
            path: self.source.display().to_string(),
            column: self.column.clone(),
            rows: self.values.len(),
            sha256: self.sha256.clone(),
        }
    }

    /// Label of observation `j` (1-based), if an index column was read.
    pub fn label(&self, j: usize) -> Option<String> {
        self.index
            .as_ref()
            .and_then(|ix| ix.get(j.checked_sub(1)?).cloned())
    }
}

pub struct IngestOptions<'a> {
    pub value: Option<&'a str>,
    pub index: Option<&'a str>,
    pub no_header: bool,
}

/// Reads the value column. Without `--col`, a single-column file uses that
/// column and a two-column file uses the second, with the first as index.
pub fn ingest_csv(path: &Path, opts: &IngestOptions) -> Result<DataFrameIn, CliError> {
    let bytes =
        std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let sha256 = Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(!opts.no_header)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let headers = if opts.no_header {
        None
    } else {
        Some(
            reader
                .headers()
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
                .clone(),
        )
    };
    let records: Vec<csv::StringRecord> = reader
        .records()
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let width = headers
        .as_ref()
        .map(|h| h.len())
        .or_else(|| records.first().map(|r| r.len()))
        .unwrap_or(0);
    if records.is_empty() || width == 0 {
        return Err(CliError::Input(format!("{}: no data rows", path.display())));
    }

    let (value_col, default_index) = match opts.value {
        Some(sel) => {
            let v = Selector::parse(sel).resolve(headers.as_ref(), width)?;
            (v, if width == 2 { Some(1 - v) } else { None })
        }
        None if width == 1 => (0, None),
        None if width == 2 => (1, Some(0)),
        None => {
            return Err(CliError::Input(format!(
                "{} has {width} columns; choose one with --col",
                path.display()
            )))
        }
    };
    let index_col = match opts.index {
        Some(sel) => Some(Selector::parse(sel).resolve(headers.as_ref(), width)?),
        None => default_index,
    };

    let mut values = Vec::with_capacity(records.len());
    let mut index = index_col.map(|_| Vec::with_capacity(records.len()));
    for (row, rec) in records.iter().enumerate() {
        let row = row + 1;
        let cell = rec.get(value_col).unwrap_or("");
        let v: f64 = cell.parse().map_err(|_| {
            CliError::Input(format!("row {row}: cannot parse '{cell}' as a number"))
        })?;
        if !v.is_finite() {
            return Err(CliError::Input(format!(
                "row {row}: non-finite value '{cell}'"
            )));
        }
        values.push(v);
        if let (Some(ix), Some(c)) = (index.as_mut(), index_col) {
            ix.push(rec.get(c).unwrap_or("").to_string());
        }
    }
    let column = match &headers {
        Some(h) => h.get(value_col).unwrap_or("").to_string(),
        None => format!("{}", value_col + 1),
    };
    Ok(DataFrameIn {
        values,
        index,
        source: path.to_path_buf(),
        column,
        sha256,
    })
}
