//! Report envelope, summaries and CSV flattening.

use serde::Serialize;
use serde_json::Value;

use crate::VERSION;

/// Report schema version; bump on incompatible layout changes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct Report<C, R> {
    pub schema_version: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub seed: u64,
    pub config: C,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_seconds: Option<f64>,
    pub warnings: Vec<String>,
    pub result: R,
}

impl<C, R> Report<C, R> {
    pub fn new(subcommand: &'static str, seed: u64, config: C, warnings: Vec<String>, result: R) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool: "tensor-mp",
            version: VERSION,
            subcommand,
            seed,
            config,
            wall_time_seconds: None,
            warnings,
            result,
        }
    }
}

/// Lower quartile, median and upper quartile (linear interpolation between
/// order statistics; an infinite neighbour is taken as is).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

pub fn quantile_sorted(v: &[f64], u: f64) -> f64 {
    let h = u * (v.len() - 1) as f64;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    let (a, b) = (v[lo], v[hi]);
    let frac = h - lo as f64;
    if a == b || frac == 0.0 {
        a
    } else if !(a.is_finite() && b.is_finite()) {
        if frac < 0.5 {
            a
        } else {
            b
        }
    } else {
        a + (b - a) * frac
    }
}

impl Quartiles {
    /// `None` for an empty input; NaNs are dropped.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let mut v: Vec<f64> = values.into_iter().filter(|x| !x.is_nan()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        Some(Self {
            q1: quantile_sorted(&v, 0.25),
            median: quantile_sorted(&v, 0.5),
            q3: quantile_sorted(&v, 0.75),
        })
    }
}

pub fn median(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    Quartiles::of(values).map(|q| q.median)
}

fn flatten_into(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                flatten_into(&key(k), x, out);
            }
        }
        Value::Array(a) => {
            let cells: Vec<String> = a.iter().map(scalar).collect();
            out.push((prefix.to_string(), cells.join(";")));
        }
        other => out.push((prefix.to_string(), scalar(other))),
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Object(_) | Value::Array(_) => v.to_string(),
        other => other.to_string(),
    }
}

/// One CSV row per element of `result[rows_key]`, nested fields joined with
/// dots, arrays with `;`. Columns follow first appearance.
pub fn to_csv(report: &Value, rows_key: &str) -> Result<String, csv::Error> {
    let rows = report
        .get("result")
        .and_then(|r| r.get(rows_key))
        .and_then(Value::as_array)
        .cloned()
        .unwrap_or_default();
    let flat: Vec<Vec<(String, String)>> = rows
        .iter()
        .map(|r| {
            let mut out = Vec::new();
            flatten_into("", r, &mut out);
            out
        })
        .collect();
    let mut cols: Vec<String> = Vec::new();
    for row in &flat {
        for (k, _) in row {
            if !cols.contains(k) {
                cols.push(k.clone());
            }
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&cols)?;
    for row in &flat {
        let rec: Vec<&str> = cols
            .iter()
            .map(|c| row.iter().find(|(k, _)| k == c).map_or("", |(_, v)| v.as_str()))
            .collect();
        w.write_record(rec)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
