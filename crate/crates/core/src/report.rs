//! Versioned JSON report envelope and its renderings.
//!
//! The table rendering is lossy: nested values are flattened to compact JSON
//! and arrays of scalars are printed inline. JSON is the canonical form.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::defaults::{Defaults, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::verdict::Outcome;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub command: String,
    /// Absent for commands that compute a value rather than a verdict.
    pub outcome: Option<Outcome>,
    pub parameters: Value,
    pub defaults: Defaults,
    pub result: Value,
}

impl Report {
    pub fn new<P: Serialize, R: Serialize>(
        command: &str,
        outcome: Option<Outcome>,
        parameters: &P,
        result: &R,
    ) -> Result<Self> {
        Ok(Self {
            schema: SCHEMA_VERSION,
            command: command.to_string(),
            outcome,
            parameters: serde_json::to_value(parameters)?,
            defaults: Defaults::current(),
            result: serde_json::to_value(result)?,
        })
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report values serialize");
        s.push('\n');
        s
    }

    /// Parses a report, rejecting any schema other than the current one.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        match value.get("schema") {
            Some(Value::Number(n)) if n.as_u64() == Some(u64::from(SCHEMA_VERSION)) => {}
            other => {
                return Err(Error::SchemaMismatch {
                    expected: SCHEMA_VERSION,
                    found: other.map_or_else(|| "missing".into(), Value::to_string),
                })
            }
        }
        Ok(serde_json::from_value(value)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Table,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "table" => Ok(Format::Table),
            other => Err(Error::InvalidArgument(format!(
                "unknown format {other:?} (expected json or table)"
            ))),
        }
    }
}

/// Renders report text in the requested format.
pub fn render(text: &str, format: Format) -> Result<String> {
    let report = Report::from_json(text)?;
    Ok(match format {
        Format::Json => report.to_json(),
        Format::Table => render_table(&report),
    })
}

/// Column sets for arrays that may be empty, so their header still prints.
const KNOWN_COLUMNS: &[(&str, &[&str])] = &[
    ("pairs", &["first", "second", "covariance", "se", "z"]),
    ("per_c", &["c", "id"]),
    ("per_pair", &["r", "r_prime", "grid", "report"]),
];

/// Tab-separated sections: a summary of scalar fields, one row per witness
/// object, and one table per array of objects.
pub fn render_table(report: &Report) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "# {}\t{}\n",
        report.command,
        outcome_name(report.outcome)
    ));
    let mut summary = Vec::new();
    let mut sections = Vec::new();
    walk("result", &report.result, &mut summary, &mut sections);
    if !summary.is_empty() {
        out.push_str("[summary]\n");
        for (k, v) in summary {
            out.push_str(&format!("{k}\t{v}\n"));
        }
    }
    for (name, header, rows) in sections {
        out.push_str(&format!("[{name}]\n{}\n", header.join("\t")));
        for row in rows {
            out.push_str(&row.join("\t"));
            out.push('\n');
        }
    }
    out
}

type Section = (String, Vec<String>, Vec<Vec<String>>);

fn outcome_name(o: Option<Outcome>) -> &'static str {
    match o {
        Some(Outcome::Holds) => "holds",
        Some(Outcome::Fails) => "fails",
        Some(Outcome::Inconclusive) => "inconclusive",
        None => "-",
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "-".into(),
        other => other.to_string(),
    }
}

fn object_row(keys: &[String], obj: &Map<String, Value>) -> Vec<String> {
    keys.iter()
        .map(|k| obj.get(k).map_or_else(|| "-".into(), cell))
        .collect()
}

fn walk(path: &str, v: &Value, summary: &mut Vec<(String, String)>, sections: &mut Vec<Section>) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let sub = format!("{path}.{k}");
                match child {
                    Value::Object(w) if k == "witness" => {
                        let keys: Vec<String> = w.keys().cloned().collect();
                        sections.push((sub, keys.clone(), vec![object_row(&keys, w)]));
                    }
                    Value::Array(items) if items.iter().all(Value::is_object) && (
                        !items.is_empty() || KNOWN_COLUMNS.iter().any(|(n, _)| n == k)
                    ) =>
                    {
                        let keys: Vec<String> = match items.first() {
                            Some(Value::Object(first)) => first.keys().cloned().collect(),
                            _ => KNOWN_COLUMNS
                                .iter()
                                .find(|(n, _)| n == k)
                                .map(|(_, cols)| cols.iter().map(|c| c.to_string()).collect())
                                .unwrap_or_default(),
                        };
                        let rows = items
                            .iter()
                            .filter_map(Value::as_object)
                            .map(|o| object_row(&keys, o))
                            .collect();
                        sections.push((sub, keys, rows));
                    }
                    Value::Object(_) => walk(&sub, child, summary, sections),
                    other => summary.push((sub, cell(other))),
                }
            }
        }
        other => summary.push((path.to_string(), cell(other))),
    }
}
