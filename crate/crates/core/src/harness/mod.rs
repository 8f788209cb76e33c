//! Instance files, experiment reports and the invariant suites.

mod commands;
mod instance;
mod suite;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use commands::{fastforward, hitting, qwalk_verify, resistance, search, simulate_walk, SearchKind, SearchRequest};
pub use instance::{load_instance, parse_instance, InstanceFile, LoadedInstance, INSTANCE_VERSION};
pub use suite::{item_seed, run_suite, run_suite_with, SuiteName, SuiteOptions};

/// Fixed column order of every tabular report.
pub const COLUMNS: [&str; 9] = ["instance", "operation", "lhs", "rhs", "residual", "tolerance", "verdict", "seed", "wall_ms"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// The check itself could not be evaluated.
    Error,
    /// Recorded value with no asserted bound.
    Info,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Error => "error",
            Verdict::Info => "info",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "pass" => Ok(Verdict::Pass),
            "fail" => Ok(Verdict::Fail),
            "error" => Ok(Verdict::Error),
            "info" => Ok(Verdict::Info),
            _ => Err(Error::Instance(format!("unknown verdict `{s}`"))),
        }
    }
}

/// One asserted identity or inequality: both sides and the residual.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub instance: String,
    pub operation: String,
    #[serde(with = "float")]
    pub lhs: f64,
    #[serde(with = "float")]
    pub rhs: f64,
    #[serde(with = "float")]
    pub residual: f64,
    #[serde(with = "float")]
    pub tolerance: f64,
    pub verdict: Verdict,
    pub seed: u64,
    #[serde(with = "float")]
    pub wall_ms: f64,
}

impl ReportRow {
    /// |lhs − rhs| ≤ tol.
    pub fn equal(instance: &str, operation: &str, lhs: f64, rhs: f64, tol: f64) -> Self {
        Self::with_residual(instance, operation, lhs, rhs, (lhs - rhs).abs(), tol)
    }

    /// |lhs − rhs| / |rhs| ≤ tol.
    pub fn relative(instance: &str, operation: &str, lhs: f64, rhs: f64, tol: f64) -> Self {
        Self::with_residual(instance, operation, lhs, rhs, (lhs - rhs).abs() / rhs.abs(), tol)
    }

    /// lhs ≤ rhs + tol; the residual is the excess, 0 when the bound holds.
    pub fn at_most(instance: &str, operation: &str, lhs: f64, rhs: f64, tol: f64) -> Self {
        Self::with_residual(instance, operation, lhs, rhs, (lhs - rhs).max(0.0), tol)
    }

    /// lhs < rhs strictly; residual is the gap lhs − rhs, which must be negative.
    pub fn strictly_less(instance: &str, operation: &str, lhs: f64, rhs: f64) -> Self {
        let mut row = Self::with_residual(instance, operation, lhs, rhs, lhs - rhs, 0.0);
        row.verdict = if lhs < rhs { Verdict::Pass } else { Verdict::Fail };
        row
    }

    pub fn info(instance: &str, operation: &str, value: f64) -> Self {
        let mut row = Self::with_residual(instance, operation, value, value, 0.0, 0.0);
        row.verdict = Verdict::Info;
        row
    }

    pub fn error(instance: &str, operation: &str, err: &Error) -> Self {
        let mut row = Self::with_residual(instance, &format!("{operation}: {err}"), f64::NAN, f64::NAN, f64::NAN, 0.0);
        row.verdict = Verdict::Error;
        row
    }

    fn with_residual(instance: &str, operation: &str, lhs: f64, rhs: f64, residual: f64, tol: f64) -> Self {
        let verdict = if residual <= tol { Verdict::Pass } else { Verdict::Fail };
        ReportRow {
            instance: instance.into(),
            operation: operation.into(),
            lhs,
            rhs,
            residual,
            tolerance: tol,
            verdict,
            seed: 0,
            wall_ms: 0.0,
        }
    }

    pub fn seeded(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn passed(&self) -> bool {
        matches!(self.verdict, Verdict::Pass | Verdict::Info)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub command: String,
    pub seed: u64,
    /// Resolved configuration, so the report describes itself.
    pub config: serde_json::Value,
    /// Per-run records (outcomes with counters) for non-suite commands.
    pub runs: Vec<serde_json::Value>,
    pub rows: Vec<ReportRow>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::Config(format!("unknown format `{s}` (csv or json)"))),
        }
    }
}

impl ExperimentReport {
    pub fn new(command: &str, seed: u64) -> Self {
        ExperimentReport {
            command: command.into(),
            seed,
            config: serde_json::Value::Null,
            runs: Vec::new(),
            rows: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(ReportRow::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| !r.passed())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Instance(format!("report: {e}")))
    }

    /// The rows only, in [`COLUMNS`] order.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(COLUMNS).expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.instance.clone(),
                r.operation.clone(),
                float::text(r.lhs),
                float::text(r.rhs),
                float::text(r.residual),
                float::text(r.tolerance),
                r.verdict.as_str().to_string(),
                r.seed.to_string(),
                float::text(r.wall_ms),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    pub fn rows_from_csv(text: &str) -> Result<Vec<ReportRow>> {
        let bad = |e: String| Error::Instance(format!("report csv: {e}"));
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = r.headers().map_err(|e| bad(e.to_string()))?.iter().map(String::from).collect();
        if header != COLUMNS {
            return Err(bad(format!("unexpected header {header:?}")));
        }
        let mut rows = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let num = |i: usize| float::parse(&rec[i]).ok_or_else(|| bad(format!("row {}: bad number `{}`", line + 1, &rec[i])));
            rows.push(ReportRow {
                instance: rec[0].to_string(),
                operation: rec[1].to_string(),
                lhs: num(2)?,
                rhs: num(3)?,
                residual: num(4)?,
                tolerance: num(5)?,
                verdict: Verdict::parse(&rec[6])?,
                seed: rec[7].parse().map_err(|_| bad(format!("row {}: bad seed", line + 1)))?,
                wall_ms: num(8)?,
            });
        }
        Ok(rows)
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

pub fn save_report(report: &ExperimentReport, path: &Path, format: Format) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(report.render(format).as_bytes())?;
    Ok(())
}

/// f64 fields: shortest round-trip decimal, with non-finite values as strings.
mod float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn text(x: f64) -> String {
        if x.is_nan() {
            "NaN".into()
        } else if x.is_infinite() {
            if x > 0.0 { "inf".into() } else { "-inf".into() }
        } else {
            // Debug for f64 is the shortest string that parses back exactly
            format!("{x:?}")
        }
    }

    pub fn parse(s: &str) -> Option<f64> {
        match s {
            "NaN" => Some(f64::NAN),
            "inf" => Some(f64::INFINITY),
            "-inf" => Some(f64::NEG_INFINITY),
            _ => s.parse().ok(),
        }
    }

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_str(&text(*x))
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => parse(&t).ok_or_else(|| serde::de::Error::custom(format!("bad number `{t}`"))),
        }
    }
}
