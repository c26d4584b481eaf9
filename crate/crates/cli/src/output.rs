use std::fs;
use std::io::Write;
use std::path::Path;

use classnorm::{Error, Result};
use serde::Serialize;
use serde_json::Value;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Flat view of a result for `--format csv`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

pub fn cell<T: ToString>(v: T) -> String {
    v.to_string()
}

pub fn opt_cell<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// A command result: the JSON document and its tabular form.
#[derive(Clone, Debug, PartialEq)]
pub struct Output {
    pub json: Value,
    pub table: Table,
}

impl Output {
    pub fn new<S: Serialize>(value: &S, table: Table) -> Result<Self> {
        Ok(Self {
            json: serde_json::to_value(value)?,
            table,
        })
    }

    pub fn render(&self, format: Format) -> Result<Vec<u8>> {
        match format {
            Format::Json => {
                let mut buf = serde_json::to_vec_pretty(&self.json)?;
                buf.push(b'\n');
                Ok(buf)
            }
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
                w.write_record(&self.table.header).map_err(csv_err)?;
                for r in &self.table.rows {
                    w.write_record(r).map_err(csv_err)?;
                }
                w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
            }
        }
    }

    pub fn emit(&self, format: Format, out: Option<&Path>) -> Result<()> {
        let bytes = self.render(format)?;
        match out {
            Some(p) => fs::write(p, bytes).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.display())))),
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(&bytes)?;
                stdout.flush()?;
                Ok(())
            }
        }
    }
}
