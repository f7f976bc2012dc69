//! One report type rendered three ways, so JSON, CSV and text always carry
//! the same numbers.

use std::fmt::Write as _;

use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    Missing,
}

impl From<f64> for Field {
    fn from(v: f64) -> Self {
        Field::Num(v)
    }
}

impl From<usize> for Field {
    fn from(v: usize) -> Self {
        Field::Int(v as i64)
    }
}

impl From<u64> for Field {
    fn from(v: u64) -> Self {
        Field::Int(v as i64)
    }
}

impl From<bool> for Field {
    fn from(v: bool) -> Self {
        Field::Bool(v)
    }
}

impl From<&str> for Field {
    fn from(v: &str) -> Self {
        Field::Text(v.to_string())
    }
}

impl From<String> for Field {
    fn from(v: String) -> Self {
        Field::Text(v)
    }
}

impl<T: Into<Field>> From<Option<T>> for Field {
    fn from(v: Option<T>) -> Self {
        v.map_or(Field::Missing, Into::into)
    }
}

impl Field {
    fn json(&self) -> Value {
        match self {
            Field::Num(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Field::Int(v) => Value::from(*v),
            Field::Text(s) => Value::from(s.as_str()),
            Field::Bool(b) => Value::from(*b),
            Field::Missing => Value::Null,
        }
    }

    /// Shortest representation that parses back to the same value.
    fn exact(&self) -> String {
        match self {
            Field::Num(v) if v.is_finite() => format!("{v:?}"),
            Field::Num(v) => v.to_string(),
            Field::Int(v) => v.to_string(),
            Field::Text(s) => s.clone(),
            Field::Bool(b) => b.to_string(),
            Field::Missing => String::new(),
        }
    }

    fn human(&self) -> String {
        match self {
            Field::Num(v) => sig6(*v),
            Field::Missing => "-".into(),
            other => other.exact(),
        }
    }
}

/// `%g`-style formatting with six significant digits.
pub fn sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    let exp = v.abs().log10().floor() as i32;
    if !(-4..6).contains(&exp) {
        let s = format!("{v:.5e}");
        let (mant, e) = s.split_once('e').unwrap();
        return format!("{}e{e}", trim_zeros(mant));
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub type Row = Vec<(String, Field)>;

#[derive(Debug, Clone)]
pub struct Report {
    pub command: &'static str,
    /// Fully resolved settings, defaults included.
    pub config: Row,
    pub rows: Vec<Row>,
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn object(row: &Row) -> Value {
    Value::Object(row.iter().map(|(k, v)| (k.clone(), v.json())).collect::<Map<_, _>>())
}

impl Report {
    pub fn new(command: &'static str, config: Row) -> Self {
        Report {
            command,
            config,
            rows: Vec::new(),
        }
    }

    pub fn json(&self) -> Value {
        serde_json::json!({
            "schema_version": resi::SCHEMA_VERSION,
            "command": self.command,
            "config": object(&self.config),
            "results": self.rows.iter().map(object).collect::<Vec<_>>(),
        })
    }

    /// Configuration as `# key=value` comment lines, then a header and one
    /// line per result row.
    pub fn csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# schema_version={}", resi::SCHEMA_VERSION).unwrap();
        writeln!(out, "# command={}", self.command).unwrap();
        for (k, v) in &self.config {
            writeln!(out, "# {k}={}", v.exact()).unwrap();
        }
        if let Some(first) = self.rows.first() {
            let header: Vec<String> = first.iter().map(|(k, _)| csv_cell(k)).collect();
            writeln!(out, "{}", header.join(",")).unwrap();
            for row in &self.rows {
                let cells: Vec<String> = row.iter().map(|(_, v)| csv_cell(&v.exact())).collect();
                writeln!(out, "{}", cells.join(",")).unwrap();
            }
        }
        out
    }

    pub fn text(&self) -> String {
        let mut out = String::new();
        let width = self.config.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        writeln!(out, "{}", self.command).unwrap();
        for (k, v) in &self.config {
            writeln!(out, "  {k:width$}  {}", v.human()).unwrap();
        }
        writeln!(out).unwrap();
        match self.rows.as_slice() {
            [] => {}
            [row] => {
                let width = row.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
                for (k, v) in row {
                    writeln!(out, "{k:width$}  {}", v.human()).unwrap();
                }
            }
            rows => {
                let cells: Vec<Vec<String>> = rows
                    .iter()
                    .map(|r| r.iter().map(|(_, v)| v.human()).collect())
                    .collect();
                let names: Vec<&str> = rows[0].iter().map(|(k, _)| k.as_str()).collect();
                let widths: Vec<usize> = (0..names.len())
                    .map(|j| cells.iter().map(|r| r[j].len()).chain([names[j].len()]).max().unwrap())
                    .collect();
                let line = |items: Vec<&str>| {
                    items
                        .iter()
                        .zip(&widths)
                        .map(|(s, w)| format!("{s:>w$}"))
                        .collect::<Vec<_>>()
                        .join("  ")
                };
                writeln!(out, "{}", line(names.clone())).unwrap();
                for r in &cells {
                    writeln!(out, "{}", line(r.iter().map(String::as_str).collect())).unwrap();
                }
            }
        }
        out
    }
}
