//! Byte-stable report serialization: sorted-key JSON with fixed float
//! formatting and plain CSV.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

/// Significant digits kept for every float written to a report.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Rounds to 12 significant digits and prints the shortest representation
/// that reads back to the rounded value. Non-finite values become `null`.
pub fn format_float(x: f64) -> String {
    if !x.is_finite() {
        return "null".into();
    }
    if x == 0.0 {
        return "0.0".into();
    }
    let rounded: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x);
    format!("{rounded:?}")
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&format_float(n.as_f64().unwrap_or(f64::NAN)));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_value(out, item, indent + 1);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&Value::String((*k).clone()).to_string());
                out.push_str(": ");
                write_value(out, &map[k.as_str()], indent + 1);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

/// Canonical JSON text: sorted keys, two-space indent, trailing newline.
pub fn to_canonical_json<T: Serialize + ?Sized>(obj: &T) -> Result<String, serde_json::Error> {
    let v = serde_json::to_value(obj)?;
    let mut out = String::new();
    write_value(&mut out, &v, 0);
    out.push('\n');
    Ok(out)
}

pub fn write_report<T: Serialize + ?Sized>(obj: &T, path: impl AsRef<Path>) -> io::Result<()> {
    let text = to_canonical_json(obj).map_err(io::Error::other)?;
    std::fs::write(path, text)
}

/// A CSV cell: floats are formatted like report floats.
#[derive(Debug, Clone, PartialEq)]
pub enum CsvCell {
    Text(String),
    Float(f64),
    Int(i64),
    Empty,
}

impl From<f64> for CsvCell {
    fn from(x: f64) -> Self {
        CsvCell::Float(x)
    }
}

impl From<Option<f64>> for CsvCell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(CsvCell::Empty, CsvCell::Float)
    }
}

impl From<usize> for CsvCell {
    fn from(x: usize) -> Self {
        CsvCell::Int(x as i64)
    }
}

impl From<&str> for CsvCell {
    fn from(s: &str) -> Self {
        CsvCell::Text(s.to_string())
    }
}

impl From<String> for CsvCell {
    fn from(s: String) -> Self {
        CsvCell::Text(s)
    }
}

fn csv_field(c: &CsvCell) -> String {
    match c {
        CsvCell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        CsvCell::Text(s) => s.clone(),
        CsvCell::Float(x) if x.is_finite() => format_float(*x),
        CsvCell::Float(_) | CsvCell::Empty => String::new(),
        CsvCell::Int(i) => i.to_string(),
    }
}

pub fn to_csv(header: &[&str], rows: &[Vec<CsvCell>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let fields: Vec<String> = row.iter().map(csv_field).collect();
        let _ = writeln!(out, "{}", fields.join(","));
    }
    out
}

pub fn write_csv(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<CsvCell>]) -> io::Result<()> {
    std::fs::write(path, to_csv(header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_are_fixed() {
        assert_eq!(format_float(1.0), "1.0");
        assert_eq!(format_float(16.0 / 30.0), "0.533333333333");
        assert_eq!(format_float(0.1 + 0.2), "0.3");
        assert_eq!(format_float(-0.5), "-0.5");
        assert_eq!(format_float(f64::NAN), "null");
        assert_eq!(format_float(1e-20), "1e-20");
    }

    #[test]
    fn keys_are_sorted() {
        let text = to_canonical_json(&json!({"b": 1, "a": [0.5, null], "c": {}})).unwrap();
        assert_eq!(text, "{\n  \"a\": [\n    0.5,\n    null\n  ],\n  \"b\": 1,\n  \"c\": {}\n}\n");
    }

    #[test]
    fn csv_layout() {
        let rows = vec![vec![CsvCell::from(0.5), CsvCell::from("x,y"), CsvCell::Empty]];
        assert_eq!(to_csv(&["a", "b", "c"], &rows), "a,b,c\n0.5,\"x,y\",\n");
    }
}
