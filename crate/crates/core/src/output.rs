//! CSV and JSON emission of tabular results.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Int(i) => Some(*i as f64),
            Cell::Text(_) => None,
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Num(v) if v.is_finite() => json!(v),
            Cell::Num(_) => Value::Null,
            Cell::Int(i) => json!(i),
            Cell::Text(s) => json!(s),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::InvalidParameter(format!(
                "unknown format '{other}' (expected csv or json)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// `%.15g`-style rendering: 15 significant digits, trailing zeros dropped.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.14e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..15).contains(&exp) {
        let decimals = (14 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        format!(
            "{}e{}{:02}",
            trim_zeros(mantissa.to_string()),
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn csv_field(cell: &Cell) -> String {
    match cell {
        Cell::Num(v) => format_number(*v),
        Cell::Int(i) => i.to_string(),
        Cell::Text(s) => {
            if s.contains([',', '"', '\n', '\r']) {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.clone()
            }
        }
    }
}

pub fn to_csv(table: &Table) -> String {
    let mut out = table.columns.join(",");
    out.push('\n');
    for row in &table.rows {
        let fields: Vec<String> = row.iter().map(csv_field).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Provenance block for JSON output.
#[derive(Clone, Debug, Default)]
pub struct Meta {
    pub command: String,
    pub config: BTreeMap<String, String>,
}

pub fn to_json(table: &Table, meta: &Meta) -> String {
    let rows: Vec<Value> = table
        .rows
        .iter()
        .map(|row| {
            let obj: Map<String, Value> = table
                .columns
                .iter()
                .zip(row)
                .map(|(c, v)| (c.clone(), v.to_json()))
                .collect();
            Value::Object(obj)
        })
        .collect();
    let doc = json!({
        "meta": {
            "command": meta.command,
            "version": env!("CARGO_PKG_VERSION"),
            "config": meta.config,
        },
        "rows": rows,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("json serialization");
    s.push('\n');
    s
}

pub fn render(table: &Table, format: Format, meta: &Meta) -> String {
    match format {
        Format::Csv => to_csv(table),
        Format::Json => to_json(table, meta),
    }
}

/// Writes to `path`, or standard output when `None`.
pub fn write_output(table: &Table, format: Format, path: Option<&Path>, meta: &Meta) -> Result<()> {
    let text = render(table, format, meta);
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| Error::Io {
            path: p.display().to_string(),
            source,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| Error::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(format_number(0.5), "0.5");
        assert_eq!(format_number(-0.232050807568877), "-0.232050807568877");
        assert_eq!(format_number(1.0 / 3.0), "0.333333333333333");
        assert_eq!(format_number(1e-7), "1e-07");
        assert_eq!(format_number(1.24e-11), "1.24e-11");
        assert_eq!(format_number(123456789012345678.0), "1.23456789012346e+17");
        assert_eq!(format_number(100.0), "100");
        assert_eq!(format_number(0.0001), "0.0001");
        assert_eq!(format_number(9.9999999999999995), "10");
        assert_eq!(format_number(f64::NAN), "nan");
        let x = 0.7329531261;
        assert_eq!(format_number(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn empty_csv_is_header_only() {
        let t = Table::new(["lambda", "n", "energy"]);
        assert_eq!(to_csv(&t), "lambda,n,energy\n");
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new(["a", "b", "c"]);
        t.push(vec![Cell::Num(1.5), Cell::Int(2), Cell::Text("x, y".into())]);
        let s = to_csv(&t);
        assert_eq!(s, "a,b,c\n1.5,2,\"x, y\"\n");
        assert!(!s.contains('\r'));
    }

    #[test]
    fn json_layout() {
        let mut t = Table::new(["lambda", "e"]);
        t.push(vec![Cell::Num(0.0), Cell::Num(f64::NAN)]);
        let meta = Meta {
            command: "solve".into(),
            config: [("lambda".to_string(), "0".to_string())].into(),
        };
        let v: Value = serde_json::from_str(&to_json(&t, &meta)).unwrap();
        assert_eq!(v["meta"]["command"], "solve");
        assert_eq!(v["meta"]["config"]["lambda"], "0");
        assert_eq!(v["rows"][0]["lambda"], 0.0);
        assert!(v["rows"][0]["e"].is_null());
    }

    #[test]
    fn io_error_names_path() {
        let t = Table::new(["a"]);
        let p = Path::new("/nonexistent-dir/x.csv");
        match write_output(&t, Format::Csv, Some(p), &Meta::default()) {
            Err(Error::Io { path, .. }) => assert!(path.contains("nonexistent-dir")),
            other => panic!("{other:?}"),
        }
    }
}
