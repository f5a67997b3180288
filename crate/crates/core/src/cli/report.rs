//! Report documents written by the CLI.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{Analysis, InferenceResult};
use crate::simulation::{fmt_num, StudyReport};

pub const TOOL: &str = "selinf";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    /// Seconds since the epoch, taken from SOURCE_DATE_EPOCH when set so
    /// that reports stay byte-reproducible otherwise.
    pub created_unix: Option<u64>,
}

impl Metadata {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            created_unix: std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse().ok()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisPayload {
    pub response: String,
    pub n: usize,
    pub p: usize,
    pub lambda_per_obs: f64,
    pub lambda_sum: f64,
    pub sigma: f64,
    pub intercept: Option<f64>,
    pub active: Vec<String>,
    pub cutoff: Option<f64>,
    pub lambda_high_sum: Option<f64>,
    pub high_value_t: Option<Vec<String>>,
    pub high_value_l1: Option<Vec<String>>,
    pub rows: Vec<InferenceResult>,
}

impl AnalysisPayload {
    pub fn new(a: &Analysis, response: &str, names: &dyn Fn(usize) -> String, n: usize, p: usize) -> Self {
        let named = |v: &[usize]| v.iter().map(|&j| names(j)).collect::<Vec<_>>();
        Self {
            response: response.into(),
            n,
            p,
            lambda_per_obs: a.lambda / n as f64,
            lambda_sum: a.lambda,
            sigma: a.sigma,
            intercept: a.fit.intercept,
            active: named(&a.fit.active_set),
            cutoff: a.cutoff,
            lambda_high_sum: a.lambda_high,
            high_value_t: a.high_value_t.as_deref().map(named),
            high_value_l1: a.high_value_l1.as_deref().map(named),
            rows: a.results.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum Payload {
    Analysis(AnalysisPayload),
    Study(Box<StudyReport>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub metadata: Metadata,
    pub input_digest: String,
    pub payload: Payload,
}

impl ReportDocument {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Input(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Input(format!("bad report document: {e}")))
    }
}

/// Column order of report.csv. Append only.
pub const REPORT_COLUMNS: [&str; 17] = [
    "variable",
    "name",
    "method",
    "target",
    "high_value",
    "estimate",
    "lower",
    "upper",
    "p_value",
    "z_obs",
    "sigma_eta",
    "level",
    "lower_infinite",
    "upper_infinite",
    "mle_unbounded",
    "flags",
    "error",
];

pub fn report_csv(rows: &[InferenceResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Input(e.to_string());
    w.write_record(REPORT_COLUMNS).map_err(io)?;
    for r in rows {
        w.write_record([
            r.variable.to_string(),
            r.name.clone(),
            r.method.to_string(),
            r.target.kind.to_string(),
            r.high_value.map(|b| b.to_string()).unwrap_or_default(),
            fmt_num(r.point_estimate),
            fmt_num(r.interval.lower),
            fmt_num(r.interval.upper),
            fmt_num(r.p_value),
            fmt_num(r.z_obs),
            fmt_num(r.sigma_eta),
            fmt_num(r.interval.level),
            r.interval.lower_infinite.to_string(),
            r.interval.upper_infinite.to_string(),
            r.mle_unbounded.to_string(),
            r.flags.join(";"),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Input(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Input(e.to_string()))
}
