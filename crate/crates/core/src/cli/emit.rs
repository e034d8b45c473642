use std::fmt::Write as _;
use std::str::FromStr;

use serde_json::Value;

use super::run::Report;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(Error::config(
                "format",
                format!("unknown format `{s}`, use json or csv"),
            )),
        }
    }
}

/// A float with 12 significant digits, trailing zeros trimmed; scientific
/// notation outside `1e-5 <= |v| < 1e12`.
pub fn format_float(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "null".into()
        } else if v > 0.0 {
            "\"inf\"".into()
        } else {
            "\"-inf\"".into()
        };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let sign = if negative { "-" } else { "" };
    if !(-5..12).contains(&exp) {
        let m = format!("{}.{}", &digits[..1], &digits[1..]);
        return format!("{sign}{}e{exp}", trim(&m));
    }
    let s = if exp >= 0 {
        let int_len = exp as usize + 1;
        format!("{}.{}", &digits[..int_len], &digits[int_len..])
    } else {
        format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
    };
    format!("{sign}{}", trim(&s))
}

fn trim(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&format_float(n.as_f64().expect("f64")));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_value(out, item, indent + 1);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            out.push_str("{\n");
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            for (i, k) in keys.iter().enumerate() {
                let _ = write!(out, "{}{}: ", pad(indent + 1), Value::String((*k).clone()));
                write_value(out, &map[*k], indent + 1);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

/// Canonical JSON: sorted keys, two-space indent, 12 significant digits.
pub fn to_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0);
    out.push('\n');
    out
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Value::String(s) => s.clone(),
        Value::Number(n) if n.is_f64() => format_float(n.as_f64().expect("f64")).trim_matches('"').to_string(),
        other => other.to_string(),
    }
}

pub fn to_csv(report: &Report) -> String {
    let mut out = report.table.columns.join(",");
    out.push('\n');
    for row in &report.table.rows {
        let cells: Vec<String> = row.iter().map(csv_cell).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn render(report: &Report, format: Format) -> String {
    match format {
        Format::Json => to_json(&report.to_value()),
        Format::Csv => to_csv(report),
    }
}

/// Writes the rendered report to `path`, or stdout when `None`.
pub fn emit(report: &Report, format: Format, path: Option<&std::path::Path>) -> Result<()> {
    let text = render(report, format);
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(text.as_bytes()).map_err(Error::from)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn float_formatting() {
        assert_eq!(format_float(0.5), "0.5");
        assert_eq!(format_float(1.0), "1");
        assert_eq!(format_float(-2.25), "-2.25");
        assert_eq!(format_float(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_float(2.0 / 3.0 * 1e-7), "6.66666666667e-8");
        assert_eq!(format_float(123_456_789.123_457), "123456789.123");
        assert_eq!(format_float(9.9999999999999), "10");
        assert_eq!(format_float(0.000012345), "0.000012345");
        assert_eq!(format_float(3e15), "3e15");
        assert_eq!(format_float(f64::INFINITY), "\"inf\"");
    }

    #[test]
    fn canonical_json() {
        let v = json!({"b": [1, 2.5], "a": {"z": null, "c": "DIVERGENT"}, "e": []});
        let s = to_json(&v);
        assert_eq!(
            s,
            "{\n  \"a\": {\n    \"c\": \"DIVERGENT\",\n    \"z\": null\n  },\n  \"b\": [\n    1,\n    2.5\n  ],\n  \"e\": []\n}\n"
        );
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["b"][1], json!(2.5));
    }
}
