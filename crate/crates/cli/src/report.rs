// SPDX-License-Identifier: MIT OR Apache-2.0

use std::io::Write;
use std::path::Path;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;
use crate::ingest::InputDigest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub command: Vec<String>,
    pub version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inputs: Option<InputDigest>,
    pub results: Value,
    pub wall_time_secs: f64,
}

/// Flat view of a result for CSV and text output.
#[derive(Debug, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Self {
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers)
            .map_err(|e| CliError::Io(e.to_string()))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| CliError::Io(e.to_string()))?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.to_string()))
    }

    fn to_text(&self) -> String {
        let mut width: Vec<usize> = self.headers.iter().map(|h| h.len()).collect();
        for r in &self.rows {
            for (w, c) in width.iter_mut().zip(r) {
                *w = (*w).max(c.len());
            }
        }
        let line = |cells: &[String]| {
            let mut s = cells
                .iter()
                .zip(&width)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect::<Vec<_>>()
                .join("  ");
            s.push('\n');
            s
        };
        let mut out = line(&self.headers);
        for r in &self.rows {
            out.push_str(&line(r));
        }
        out
    }
}

pub struct Output {
    pub results: Value,
    pub table: Table,
    /// Replaces the generic text rendering when set.
    pub text: Option<String>,
}

impl Output {
    pub fn new<S: Serialize>(results: &S, table: Table) -> Result<Self, CliError> {
        let results = serde_json::to_value(results).map_err(|e| CliError::Io(e.to_string()))?;
        Ok(Self {
            results,
            table,
            text: None,
        })
    }
}

pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn emit(
    report: &Report,
    table: &Table,
    text: Option<&str>,
    format: Format,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let body = match format {
        Format::Json => {
            let mut s =
                serde_json::to_vec_pretty(report).map_err(|e| CliError::Io(e.to_string()))?;
            s.push(b'\n');
            s
        }
        Format::Csv => table.to_csv()?,
        Format::Table => text
            .map(str::to_string)
            .unwrap_or_else(|| table.to_text())
            .into_bytes(),
    };
    match out {
        Some(p) => {
            std::fs::write(p, body).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
        }
        None => std::io::stdout()
            .write_all(&body)
            .map_err(|e| CliError::Io(e.to_string())),
    }
}

pub fn emit_table(table: &Table, path: &Path) -> Result<(), CliError> {
    std::fs::write(path, table.to_csv()?)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
