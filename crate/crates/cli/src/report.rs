//! Tabular reports written as CSV or JSON.

use std::io::Write;

use serde_json::{Map, Value};

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
    Bool(bool),
    Null,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Null => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v),
            Cell::Num(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Text(s) => Value::from(s.clone()),
            Cell::Bool(b) => Value::from(*b),
            Cell::Null => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Null, Into::into)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// A table of rows plus constant metadata. Single-row reports render as one
/// flat JSON object.
#[derive(Debug)]
pub struct Report {
    pub command: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub meta: Vec<(&'static str, Cell)>,
    pub single: bool,
    /// Extra structured JSON attached under its key (ignored in CSV).
    pub detail: Option<(&'static str, Value)>,
}

impl Report {
    pub fn table(command: &'static str, columns: Vec<&'static str>) -> Self {
        Report {
            command,
            columns,
            rows: Vec::new(),
            meta: Vec::new(),
            single: false,
            detail: None,
        }
    }

    pub fn single(command: &'static str, fields: Vec<(&'static str, Cell)>) -> Self {
        let (columns, row): (Vec<_>, Vec<_>) = fields.into_iter().unzip();
        Report {
            command,
            columns,
            rows: vec![row],
            meta: Vec::new(),
            single: true,
            detail: None,
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn meta(mut self, key: &'static str, value: impl Into<Cell>) -> Self {
        self.meta.push((key, value.into()));
        self
    }

    pub fn write(&self, format: Format, out: &mut dyn Write) -> std::io::Result<()> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Json => self.write_json(out),
        }
    }

    fn write_csv(&self, out: &mut dyn Write) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let header: Vec<&str> = self
            .columns
            .iter()
            .copied()
            .chain(self.meta.iter().map(|m| m.0))
            .collect();
        w.write_record(&header)?;
        for row in &self.rows {
            let rec: Vec<String> = row.iter().chain(self.meta.iter().map(|m| &m.1)).map(Cell::csv).collect();
            w.write_record(&rec)?;
        }
        w.flush()
    }

    fn row_object(&self, row: &[Cell]) -> Map<String, Value> {
        self.columns
            .iter()
            .zip(row)
            .map(|(k, v)| (k.to_string(), v.json()))
            .collect()
    }

    fn write_json(&self, out: &mut dyn Write) -> std::io::Result<()> {
        let mut obj = Map::new();
        obj.insert("command".into(), Value::from(self.command));
        if self.single && self.rows.len() == 1 {
            obj.extend(self.row_object(&self.rows[0]));
        }
        for (k, v) in &self.meta {
            obj.insert(k.to_string(), v.json());
        }
        if !self.single {
            let rows: Vec<Value> = self.rows.iter().map(|r| Value::Object(self.row_object(r))).collect();
            obj.insert("rows".into(), Value::Array(rows));
        }
        if let Some((k, v)) = &self.detail {
            obj.insert(k.to_string(), v.clone());
        }
        serde_json::to_writer_pretty(&mut *out, &Value::Object(obj))?;
        writeln!(out)
    }
}
