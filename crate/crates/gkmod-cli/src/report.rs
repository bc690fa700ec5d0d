//! Reports: config, scalars, checks and one data table, written as JSON (stable key order)
//! or CSV (`#` comment preamble, header row, data rows). Floats carry 17 significant digits.

use std::io::Write;

use anyhow::Result;
use serde_json::{Map, Number, Value as Json};

use crate::config::{RunConfig, Value};

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    /// Decimal digits, so big integers survive unchanged.
    Int(String),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl Cell {
    pub fn int(v: impl ToString) -> Cell {
        Cell::Int(v.to_string())
    }
    pub fn text(v: impl Into<String>) -> Cell {
        Cell::Text(v.into())
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Cell {
        Cell::Float(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Cell {
        Cell::Bool(v)
    }
}

pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn cell_text(c: &Cell) -> String {
    match c {
        Cell::Int(s) | Cell::Text(s) => s.clone(),
        Cell::Float(x) => fmt_float(*x),
        Cell::Bool(b) => b.to_string(),
    }
}

fn cell_json(c: &Cell) -> Json {
    match c {
        Cell::Int(s) => s.parse::<Number>().map(Json::Number).unwrap_or_else(|_| Json::String(s.clone())),
        Cell::Float(x) if x.is_finite() => Json::Number(fmt_float(*x).parse().expect("formatted float")),
        Cell::Float(_) => Json::Null,
        Cell::Bool(b) => Json::Bool(*b),
        Cell::Text(s) => Json::String(s.clone()),
    }
}

fn value_cell(v: &Value) -> Cell {
    match v {
        Value::Int(i) => Cell::int(i),
        Value::Float(x) => Cell::Float(*x),
        Value::Bool(b) => Cell::Bool(*b),
        Value::Text(s) => Cell::text(s.clone()),
    }
}

#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug)]
pub struct Report {
    pub command: String,
    pub config: Vec<(String, Cell)>,
    /// Where reference values come from.
    pub references: Vec<(String, String)>,
    pub scalars: Vec<(String, Cell)>,
    pub checks: Vec<Check>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Report {
    pub fn new(cfg: &RunConfig, columns: &[&str]) -> Report {
        Report {
            command: cfg.command.clone(),
            config: cfg.values.iter().map(|(k, v)| (k.clone(), value_cell(v))).collect(),
            references: Vec::new(),
            scalars: Vec::new(),
            checks: Vec::new(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn scalar(&mut self, key: &str, v: impl Into<Cell>) {
        self.scalars.push((key.to_string(), v.into()));
    }

    pub fn reference(&mut self, key: &str, text: &str) {
        self.references.push((key.to_string(), text.to_string()));
    }

    /// Passes when value ≤ tolerance.
    pub fn check_le(&mut self, name: &str, value: f64, tolerance: f64) {
        self.checks.push(Check { name: name.into(), passed: value <= tolerance, value, tolerance });
    }

    pub fn check_true(&mut self, name: &str, ok: bool) {
        self.checks.push(Check { name: name.into(), passed: ok, value: if ok { 0.0 } else { 1.0 }, tolerance: 0.0 });
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> String {
        let pairs = |v: &[(String, Cell)]| -> Json {
            Json::Object(v.iter().map(|(k, c)| (k.clone(), cell_json(c))).collect::<Map<_, _>>())
        };
        let mut root = Map::new();
        root.insert("command".into(), Json::String(self.command.clone()));
        root.insert("config".into(), pairs(&self.config));
        root.insert(
            "references".into(),
            Json::Object(self.references.iter().map(|(k, v)| (k.clone(), Json::String(v.clone()))).collect()),
        );
        root.insert("scalars".into(), pairs(&self.scalars));
        let checks = self
            .checks
            .iter()
            .map(|c| {
                let mut m = Map::new();
                m.insert("name".into(), Json::String(c.name.clone()));
                m.insert("passed".into(), Json::Bool(c.passed));
                m.insert("value".into(), cell_json(&Cell::Float(c.value)));
                m.insert("tolerance".into(), cell_json(&Cell::Float(c.tolerance)));
                Json::Object(m)
            })
            .collect();
        root.insert("checks".into(), Json::Array(checks));
        root.insert("all_passed".into(), Json::Bool(self.passed()));
        root.insert("columns".into(), Json::Array(self.columns.iter().cloned().map(Json::String).collect()));
        root.insert(
            "rows".into(),
            Json::Array(self.rows.iter().map(|r| Json::Array(r.iter().map(cell_json).collect())).collect()),
        );
        let mut s = serde_json::to_string_pretty(&Json::Object(root)).expect("json");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut out = Vec::new();
        writeln!(out, "# command: {}", self.command)?;
        for (k, v) in &self.config {
            writeln!(out, "# config {k} = {}", cell_text(v))?;
        }
        for (k, v) in &self.references {
            writeln!(out, "# reference {k}: {v}")?;
        }
        for (k, v) in &self.scalars {
            writeln!(out, "# scalar {k} = {}", cell_text(v))?;
        }
        for c in &self.checks {
            writeln!(
                out,
                "# check {}: {} (value {}, tolerance {})",
                c.name,
                if c.passed { "pass" } else { "FAIL" },
                fmt_float(c.value),
                fmt_float(c.tolerance)
            )?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r.iter().map(cell_text))?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)?)
    }
}
