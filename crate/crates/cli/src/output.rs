use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use clap::ValueEnum;
use serde::Serialize;

pub const SCHEMA: &str = "wgchan-schema v1";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Float)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

/// Full round-trip precision: 17 significant digits.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_field(c: &Cell) -> String {
    match c {
        Cell::Int(i) => i.to_string(),
        Cell::Float(x) => float(*x),
        Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Cell::Text(s) => s.clone(),
        Cell::Empty => String::new(),
    }
}

fn json_field(c: &Cell) -> String {
    match c {
        Cell::Int(i) => i.to_string(),
        Cell::Float(x) if x.is_finite() => float(*x),
        Cell::Float(_) | Cell::Empty => "null".into(),
        Cell::Text(s) => serde_json::to_string(s).expect("strings serialize"),
    }
}

/// Writes rows as they arrive; each row is flushed so partial sweeps survive interruption.
pub struct Emitter {
    out: Box<dyn Write>,
    format: Format,
    columns: Vec<&'static str>,
    rows: usize,
}

impl Emitter {
    pub fn open(
        path: Option<&Path>,
        format: Format,
        config: &serde_json::Value,
        columns: &[&'static str],
    ) -> io::Result<Self> {
        let out: Box<dyn Write> = match path {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(BufWriter::new(io::stdout())),
        };
        let mut e = Self {
            out,
            format,
            columns: columns.to_vec(),
            rows: 0,
        };
        match format {
            Format::Csv => {
                writeln!(e.out, "# {SCHEMA}")?;
                writeln!(e.out, "{}", columns.join(","))?;
            }
            Format::Json => {
                write!(
                    e.out,
                    "{{\"schema_version\":{SCHEMA_VERSION},\"config\":{},\"rows\":[",
                    serde_json::to_string(config).expect("config serializes")
                )?;
            }
        }
        e.out.flush()?;
        Ok(e)
    }

    pub fn row(&mut self, cells: Vec<Cell>) -> io::Result<()> {
        assert_eq!(cells.len(), self.columns.len(), "row width");
        match self.format {
            Format::Csv => {
                let line: Vec<String> = cells.iter().map(csv_field).collect();
                writeln!(self.out, "{}", line.join(","))?;
            }
            Format::Json => {
                if self.rows > 0 {
                    write!(self.out, ",")?;
                }
                let fields: Vec<String> = self
                    .columns
                    .iter()
                    .zip(&cells)
                    .map(|(k, v)| format!("\"{k}\":{}", json_field(v)))
                    .collect();
                write!(self.out, "\n{{{}}}", fields.join(","))?;
            }
        }
        self.rows += 1;
        self.out.flush()
    }

    pub fn finish(mut self) -> io::Result<()> {
        if self.format == Format::Json {
            writeln!(self.out, "\n]}}")?;
        }
        self.out.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            assert_eq!(float(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field(&Cell::Text("a,b".into())), "\"a,b\"");
        assert_eq!(csv_field(&Cell::Empty), "");
        assert_eq!(json_field(&Cell::Float(f64::NAN)), "null");
    }
}
