//! Report bundles and their CSV / JSON renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{KappaSpec, RawConfig};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(CliError::Validation(format!(
                "unknown format `{other}` (expected csv or json)"
            ))),
        }
    }
}

/// One query point. 1-D problems fill `x`, disc problems `r` and `phi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    pub value: f64,
    pub exact: Option<f64>,
    pub abs_err: Option<f64>,
}

impl Row {
    pub fn at_x(x: f64, value: f64, exact: Option<f64>) -> Self {
        Self {
            x: Some(x),
            r: None,
            phi: None,
            value,
            exact,
            abs_err: exact.map(|e| (value - e).abs()),
        }
    }

    pub fn at_polar(r: f64, phi: f64, value: f64, exact: Option<f64>) -> Self {
        Self {
            x: None,
            r: Some(r),
            phi: Some(phi),
            value,
            exact,
            abs_err: exact.map(|e| (value - e).abs()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub layers: usize,
    pub max_err: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LawEntry {
    pub layer: usize,
    pub max_dev: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<KappaSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_est: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub km_estimate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer_deltas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_abs_err: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer_law: Option<Vec<LawEntry>>,
    /// Further named quantities (solver iteration counts, comparison errors).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<f64>,
    /// Effective configuration after overrides.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<RawConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub solution: Vec<Row>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<SweepEntry>>,
    pub metadata: Metadata,
}

impl ReportBundle {
    /// Largest `abs_err` over the solution table.
    pub fn max_abs_err(&self) -> Option<f64> {
        self.solution
            .iter()
            .map(|r| r.abs_err)
            .try_fold(0.0f64, |m, e| e.map(|e| m.max(e)))
            .filter(|_| !self.solution.is_empty())
    }

    fn polar(&self) -> bool {
        self.solution.first().is_some_and(|r| r.x.is_none())
    }
}

/// 17 significant digits, enough to reproduce every double exactly.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn cell(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

pub fn render_csv(bundle: &ReportBundle) -> String {
    let mut out = String::new();
    let polar = bundle.polar();
    out.push_str(if polar {
        "r,phi,value,exact,abs_err\n"
    } else {
        "x,value,exact,abs_err\n"
    });
    for row in &bundle.solution {
        if polar {
            let _ = write!(out, "{},{},", cell(row.r), cell(row.phi));
        } else {
            let _ = write!(out, "{},", cell(row.x));
        }
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt_num(row.value),
            cell(row.exact),
            cell(row.abs_err)
        );
    }
    if let Some(sweep) = &bundle.sweep {
        out.push_str("\nlayers,max_err\n");
        for s in sweep {
            let _ = writeln!(out, "{},{}", s.layers, fmt_num(s.max_err));
        }
    }
    out
}

pub fn render_json(bundle: &ReportBundle) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(bundle)
        .map_err(|e| CliError::Numerical(format!("cannot serialize report: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn parse_json(text: &str) -> Result<ReportBundle, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Validation(format!("report: {e}")))
}

pub fn render(bundle: &ReportBundle, format: Format) -> Result<String, CliError> {
    match format {
        Format::Csv => Ok(render_csv(bundle)),
        Format::Json => render_json(bundle),
    }
}

/// Writes the rendered report to `out`, or returns it for stdout.
pub fn render_report(
    bundle: &ReportBundle,
    format: Format,
    out: Option<&Path>,
) -> Result<Option<String>, CliError> {
    let text = render(bundle, format)?;
    match out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| CliError::io(path, e))?;
            Ok(None)
        }
        None => Ok(Some(text)),
    }
}
