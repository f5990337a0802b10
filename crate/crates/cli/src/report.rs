//! Output model shared by all commands.
//!
//! A run produces either named fields (scalars and vectors), written to CSV
//! in long `field,index,value` form, or a table with one row per record.
//! JSON output wraps the same values as `{config, results, residuals, version}`.

use std::io::Write;

use serde_json::{json, Map, Value};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(usize),
    Float(f64),
    Bool(bool),
    Missing,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(k) => k.to_string(),
            Cell::Float(x) => format!("{x:?}"),
            Cell::Bool(b) => b.to_string(),
            Cell::Missing => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(k) => json!(k),
            Cell::Float(x) => json!(x),
            Cell::Bool(b) => json!(b),
            Cell::Missing => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Cell {
        if x.is_finite() {
            Cell::Float(x)
        } else {
            Cell::Missing
        }
    }
}

impl From<usize> for Cell {
    fn from(k: usize) -> Cell {
        Cell::Int(k)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Cell {
        Cell::Bool(b)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Cell {
        x.map_or(Cell::Missing, Cell::from)
    }
}

#[derive(Debug, Clone)]
enum Field {
    Scalar(Cell),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, Default)]
pub struct Fields(Vec<(String, Field)>);

impl Fields {
    pub fn scalar(&mut self, name: &str, value: impl Into<Cell>) -> &mut Self {
        self.0.push((name.to_string(), Field::Scalar(value.into())));
        self
    }

    pub fn vector(&mut self, name: &str, values: &[f64]) -> &mut Self {
        self.0
            .push((name.to_string(), Field::Vector(values.to_vec())));
        self
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone)]
pub enum Results {
    Fields(Fields),
    Table(Table),
}

#[derive(Debug, Clone)]
pub struct Report {
    pub config: Value,
    pub results: Results,
    pub residuals: Map<String, Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Report {
    pub fn write(&self, format: Format, out: impl Write) -> Result<(), CliError> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Json => self.write_json(out),
        }
    }

    fn write_csv(&self, out: impl Write) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(out);
        match &self.results {
            Results::Fields(fields) => {
                w.write_record(["field", "index", "value"])?;
                for (name, field) in &fields.0 {
                    match field {
                        Field::Scalar(c) => w.write_record([name.as_str(), "", &c.csv()])?,
                        Field::Vector(v) => {
                            for (i, x) in v.iter().enumerate() {
                                let cell = Cell::from(*x).csv();
                                w.write_record([name.as_str(), &i.to_string(), &cell])?;
                            }
                        }
                    }
                }
            }
            Results::Table(t) => {
                w.write_record(&t.columns)?;
                for row in &t.rows {
                    w.write_record(row.iter().map(Cell::csv))?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    fn write_json(&self, mut out: impl Write) -> Result<(), CliError> {
        let results = match &self.results {
            Results::Fields(fields) => {
                let mut m = Map::new();
                for (name, field) in &fields.0 {
                    let v = match field {
                        Field::Scalar(c) => c.json(),
                        Field::Vector(v) => v.iter().map(|x| Cell::from(*x).json()).collect(),
                    };
                    m.insert(name.clone(), v);
                }
                Value::Object(m)
            }
            Results::Table(t) => t
                .rows
                .iter()
                .map(|row| {
                    let m: Map<String, Value> = t
                        .columns
                        .iter()
                        .zip(row)
                        .map(|(c, cell)| (c.clone(), cell.json()))
                        .collect();
                    Value::Object(m)
                })
                .collect(),
        };
        let doc = json!({
            "config": self.config,
            "results": results,
            "residuals": self.residuals,
            "version": env!("CARGO_PKG_VERSION"),
        });
        serde_json::to_writer_pretty(&mut out, &doc)?;
        writeln!(out)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let mut f = Fields::default();
        f.scalar("n", 2usize)
            .scalar("sigma", 0.1 + 0.2)
            .vector("v", &[1.0, 1e-300]);
        Report {
            config: json!({"command": "test"}),
            results: Results::Fields(f),
            residuals: Map::new(),
        }
    }

    fn render(r: &Report, format: Format) -> String {
        let mut buf = Vec::new();
        r.write(format, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn long_form_csv() {
        assert_eq!(
            render(&sample(), Format::Csv),
            "field,index,value\nn,,2\nsigma,,0.30000000000000004\nv,0,1.0\nv,1,1e-300\n"
        );
    }

    #[test]
    fn json_envelope() {
        let doc: Value = serde_json::from_str(&render(&sample(), Format::Json)).unwrap();
        let keys: Vec<&str> = doc
            .as_object()
            .unwrap()
            .keys()
            .map(|k| k.as_str())
            .collect();
        assert_eq!(keys, ["config", "results", "residuals", "version"]);
        assert_eq!(doc["results"]["sigma"].as_f64(), Some(0.30000000000000004));
        assert_eq!(doc["results"]["v"][1].as_f64(), Some(1e-300));
    }

    #[test]
    fn table_rows_and_missing_cells() {
        let r = Report {
            config: Value::Null,
            results: Results::Table(Table {
                columns: vec!["n".into(), "x".into(), "ok".into()],
                rows: vec![vec![
                    Cell::from(1usize),
                    Cell::from(f64::NAN),
                    Cell::from(true),
                ]],
            }),
            residuals: Map::new(),
        };
        assert_eq!(render(&r, Format::Csv), "n,x,ok\n1,,true\n");
        let doc: Value = serde_json::from_str(&render(&r, Format::Json)).unwrap();
        assert_eq!(doc["results"][0]["x"], Value::Null);
    }
}
