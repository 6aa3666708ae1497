use std::io::Write;
use std::path::Path;

use serde_json::{Map, Number, Value};

use crate::config::Format;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
    /// absent or failed value: empty in CSV, null in JSON
    Missing,
}

impl Cell {
    pub fn float(v: f64) -> Self {
        if v.is_finite() {
            Self::Float(v)
        } else {
            Self::Missing
        }
    }

    pub fn text(s: impl Into<String>) -> Self {
        Self::Text(s.into())
    }

    fn csv_field(&self) -> String {
        match self {
            Self::Float(v) => format_float(*v),
            Self::Missing => String::new(),
            Self::Int(i) => i.to_string(),
            Self::Text(s) => s.clone(),
        }
    }

    fn json_value(&self) -> Value {
        match self {
            Self::Float(v) => Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Self::Missing => Value::Null,
            Self::Int(i) => Value::from(*i),
            Self::Text(s) => Value::from(s.as_str()),
        }
    }
}

/// 17 significant digits, enough to round-trip any f64.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Rows sharing one fixed column order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: &'static [&'static str],
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &'static [&'static str]) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row does not match the schema");
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> Vec<u8> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv_field)).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    fn to_json(&self) -> Vec<u8> {
        let objects: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let map: Map<String, Value> =
                    self.columns.iter().zip(row).map(|(k, c)| (k.to_string(), c.json_value())).collect();
                Value::Object(map)
            })
            .collect();
        let mut out = serde_json::to_vec_pretty(&Value::Array(objects)).expect("json values serialize");
        out.push(b'\n');
        out
    }
}

/// Writes to `path`, or to stdout when absent.
pub fn emit(bytes: &[u8], path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| CliError::io(p, e)),
        None => std::io::stdout().lock().write_all(bytes).map_err(|e| CliError::io("<stdout>", e)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new(&["name", "k", "x"]);
        t.push(vec![Cell::text("a,b"), Cell::Int(3), Cell::float(0.1 + 0.2)]);
        t.push(vec![Cell::text("c"), Cell::Int(-1), Cell::float(f64::NAN)]);
        t.push(vec![Cell::text("d"), Cell::Int(0), Cell::float(-1.234_567_890_123_456_7e-300)]);
        t
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = Table::new(&["a", "b"]);
        assert_eq!(t.render(Format::Csv), b"a,b\n");
        assert_eq!(t.render(Format::Json), b"[]\n");
    }

    #[test]
    fn csv_quotes_and_marks_missing() {
        let csv = String::from_utf8(sample().render(Format::Csv)).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "name,k,x");
        assert_eq!(lines[1], "\"a,b\",3,3.0000000000000004e-1");
        assert_eq!(lines[2], "c,-1,");
        assert!(csv.ends_with('\n'));
    }

    #[test]
    fn csv_json_csv_round_trip_is_exact() {
        let t = sample();
        let csv = String::from_utf8(t.render(Format::Csv)).unwrap();
        let json: Vec<Map<String, Value>> = serde_json::from_slice(&t.render(Format::Json)).unwrap();
        let mut back = Table::new(t.columns);
        for obj in json {
            back.push(vec![
                Cell::text(obj["name"].as_str().unwrap()),
                Cell::Int(obj["k"].as_i64().unwrap()),
                obj["x"].as_f64().map_or(Cell::Missing, Cell::Float),
            ]);
        }
        assert_eq!(back, t);
        assert_eq!(String::from_utf8(back.render(Format::Csv)).unwrap(), csv);
        let mut reader = csv::Reader::from_reader(csv.as_bytes());
        for (rec, row) in reader.records().zip(&t.rows) {
            let parsed = rec.unwrap()[2].parse().map_or(Cell::Missing, Cell::Float);
            assert_eq!(parsed, row[2]);
        }
    }
}
