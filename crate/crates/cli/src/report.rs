//! JSON report, schema version 1.

use serde::Serialize;
use serde_json::Value;
use socurv_core::{
    CurvatureComparisonReport, MultiplierSet, PlanarCurvatureReport, SecondOrderReport,
    SufficiencyCertificate,
};

use crate::problem_file::ProblemFile;

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct ProblemEcho {
    pub n: usize,
    pub m: usize,
    pub f: String,
    pub g: Vec<String>,
    pub x_star: Vec<f64>,
}

impl From<&ProblemFile> for ProblemEcho {
    fn from(pf: &ProblemFile) -> Self {
        ProblemEcho {
            n: pf.n,
            m: pf.m,
            f: pf.f.clone(),
            g: pf.g.clone(),
            x_star: pf.x_star.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FirstOrder {
    pub lambda: Vec<f64>,
    pub residual_norm: f64,
    /// `max_i |g_i(x*)|`.
    pub constraint_violation: f64,
    pub holds: bool,
}

impl FirstOrder {
    pub fn new(ms: &MultiplierSet, constraint_violation: f64, holds: bool) -> Self {
        FirstOrder {
            lambda: ms.lambda.clone(),
            residual_norm: ms.residual_norm,
            constraint_violation,
            holds,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Planar {
    #[serde(flatten)]
    pub curvatures: PlanarCurvatureReport,
    /// Agreement of `holds` with the curvature comparison.
    pub consistent: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: u32,
    pub command: &'static str,
    pub problem: ProblemEcho,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_order: Option<FirstOrder>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub second_order: Option<SecondOrderReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curvature: Option<CurvatureComparisonReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub planar: Option<Planar>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lemma1_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<SufficiencyCertificate>,
    pub outcome: Outcome,
    pub diagnostics: Vec<String>,
}

impl Report {
    pub fn new(command: &'static str, pf: &ProblemFile) -> Self {
        Report {
            schema: SCHEMA,
            command,
            problem: pf.into(),
            first_order: None,
            second_order: None,
            curvature: None,
            planar: None,
            lemma1_residual: None,
            certificate: None,
            outcome: Outcome::Fail,
            diagnostics: Vec::new(),
        }
    }
}

/// Keys whose `null` means "absent" rather than "not a number".
const ABSENT_OK: &[&str] = &["witness", "stopped_at", "path", "consistent"];

/// Pretty JSON with a diagnostic appended for every unexpected null.
///
/// serde_json writes non-finite floats as `null`, so nulls are located
/// after serialization. The `diagnostics` array must be the last key.
pub fn render<T: Serialize>(value: &T) -> String {
    let mut v = serde_json::to_value(value).expect("report serializes");
    let mut nulls = Vec::new();
    null_paths(&v, String::new(), &mut nulls);
    if let Some(Value::Array(diag)) = v.get_mut("diagnostics") {
        for p in nulls {
            diag.push(Value::String(format!(
                "`{p}` is null: value is non-finite or undefined"
            )));
        }
    }
    let mut s = serde_json::to_string_pretty(&v).expect("report serializes");
    s.push('\n');
    s
}

fn null_paths(v: &Value, path: String, out: &mut Vec<String>) {
    match v {
        Value::Null => out.push(path),
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                null_paths(item, format!("{path}[{i}]"), out);
            }
        }
        Value::Object(map) => {
            for (k, item) in map {
                if item.is_null() && ABSENT_OK.contains(&k.as_str()) {
                    continue;
                }
                let p = if path.is_empty() {
                    k.clone()
                } else {
                    format!("{path}.{k}")
                };
                null_paths(item, p, out);
            }
        }
        _ => {}
    }
}
