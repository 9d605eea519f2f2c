//! Output documents: a params block, one or more tables, and run metadata.
//!
//! Floating-point cells are written with 17 significant digits in both JSON and CSV, so the
//! two formats carry bit-identical numbers.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::ser::{Serialize, SerializeMap, Serializer};
use serde_json::value::RawValue;
use serde_json::{Map, Value};

/// `x` with 17 significant digits, or `None` when not finite.
pub fn format_f64(x: f64) -> Option<String> {
    x.is_finite().then(|| format!("{x:.16e}"))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(usize),
    Num(f64),
    Text(String),
    Empty,
}

impl Cell {
    fn csv_field(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Num(x) => format_f64(*x).unwrap_or_default(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Cell::Int(i) => s.serialize_u64(*i as u64),
            Cell::Num(x) => match format_f64(*x) {
                Some(text) => RawValue::from_string(text).map_err(serde::ser::Error::custom)?.serialize(s),
                None => s.serialize_none(),
            },
            Cell::Text(t) => s.serialize_str(t),
            Cell::Empty => s.serialize_none(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Tables are kept in insertion order; the first one is what CSV output writes unless another
/// is selected.
pub struct Document {
    pub params: Map<String, Value>,
    pub kind: &'static str,
    pub tables: Vec<(&'static str, Table)>,
    pub extra: Map<String, Value>,
    pub meta: Map<String, Value>,
    pub csv_table: usize,
}

impl Document {
    pub fn new(kind: &'static str, params: Map<String, Value>) -> Self {
        Self { params, kind, tables: Vec::new(), extra: Map::new(), meta: Map::new(), csv_table: 0 }
    }
}

struct Payload<'a>(&'a Document);

impl Serialize for Payload<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let doc = self.0;
        let mut map = s.serialize_map(None)?;
        map.serialize_entry("kind", doc.kind)?;
        for (k, v) in &doc.extra {
            map.serialize_entry(k, v)?;
        }
        for (name, table) in &doc.tables {
            map.serialize_entry(name, table)?;
        }
        map.end()
    }
}

impl Serialize for Document {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(3))?;
        map.serialize_entry("params", &self.params)?;
        map.serialize_entry("payload", &Payload(self))?;
        map.serialize_entry("meta", &self.meta)?;
        map.end()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

pub fn write_json<W: Write>(doc: &Document, mut w: W) -> Result<()> {
    serde_json::to_writer(&mut w, doc)?;
    writeln!(w)?;
    Ok(())
}

pub fn write_csv<W: Write>(doc: &Document, w: W) -> Result<()> {
    let (_, table) = doc.tables.get(doc.csv_table).context("document has no table to write")?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(&table.columns)?;
    for row in &table.rows {
        out.write_record(row.iter().map(Cell::csv_field))?;
    }
    out.flush()?;
    Ok(())
}

/// Writes to `path`, or to stdout when it is `None`.
pub fn emit(doc: &Document, format: Format, path: Option<&Path>) -> Result<()> {
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    };
    match format {
        Format::Json => write_json(doc, sink),
        Format::Csv => write_csv(doc, sink),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2.0f64.powi(-1070), 1e300, 0.0] {
            let s = format_f64(x).unwrap();
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(format_f64(f64::NAN), None);
    }

    #[test]
    fn cells_serialize_as_json_numbers() {
        let json = serde_json::to_string(&vec![Cell::Num(0.2), Cell::Int(3), Cell::Empty]).unwrap();
        assert_eq!(json, "[2.0000000000000001e-1,3,null]");
    }
}
