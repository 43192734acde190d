//! Experiment harness around `tensor_mp`: argument parsing, the five
//! experiment runners and report output.

pub mod config;
pub mod report;
pub mod runners;

use std::time::Instant;

use serde::Serialize;
use serde_json::Value;
use tensor_mp::Error;

pub use config::{Cli, Command, Format};

/// Crate version with the git revision it was built from.
pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "+", env!("TENSOR_MP_GIT_REV"));

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_PRECONDITION: i32 = 2;
pub const EXIT_RESOURCE_CAP: i32 = 3;

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ResourceCap { .. } | Error::Overflow(_) => EXIT_RESOURCE_CAP,
        Error::NoConvergence { .. } => EXIT_FAILURE,
        _ => EXIT_PRECONDITION,
    }
}

/// A finished report as JSON, with the key of its row table for CSV.
#[derive(Debug, Clone)]
pub struct Executed {
    pub report: Value,
    pub rows_key: &'static str,
}

fn to_value<T: Serialize>(r: &T) -> Value {
    serde_json::to_value(r).expect("reports serialize to JSON")
}

/// Run one subcommand on the current rayon pool.
pub fn execute(cmd: &Command) -> Result<Executed, Error> {
    let start = Instant::now();
    let (mut report, rows_key) = match cmd {
        Command::MpEsd(a) => (to_value(&runners::run_mp_esd(a)?), "replicates"),
        Command::QformVar(a) => (to_value(&runners::run_qform_var(a)?), "cases"),
        Command::EspLln(a) => (to_value(&runners::run_esp_lln(a)?), "grid"),
        Command::Gamma(a) => (to_value(&runners::run_gamma(a)?), "rows"),
        Command::Conditions(a) => (to_value(&runners::run_conditions(a)?), "rows"),
    };
    if cmd.common().record_time {
        let secs = start.elapsed().as_secs_f64();
        if let Value::Object(m) = &mut report {
            // keep the envelope order: insert before "warnings"
            let mut out = serde_json::Map::new();
            for (k, v) in std::mem::take(m) {
                if k == "warnings" {
                    out.insert("wall_time_seconds".into(), secs.into());
                }
                out.insert(k, v);
            }
            *m = out;
        }
    }
    Ok(Executed { report, rows_key })
}

/// Run with the requested thread count.
pub fn execute_with_threads(cmd: &Command) -> Result<Executed, Error> {
    match cmd.common().threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(|| execute(cmd)),
        None => execute(cmd),
    }
}

/// Render in the requested format; JSON ends with a newline.
pub fn render(ex: &Executed, format: Format) -> Result<String, Error> {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&ex.report).expect("JSON values serialize");
            s.push('\n');
            Ok(s)
        }
        Format::Csv => report::to_csv(&ex.report, ex.rows_key).map_err(|e| Error::InvalidArgument(format!("csv: {e}"))),
    }
}
