//! Problem configuration files: JSON with one object per problem.

use std::collections::BTreeSet;

use fredholm_core::exprlang::{self, Expr};
use fredholm_core::operator::KmSchedule;
use fredholm_core::Scheme;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KappaSpec {
    Constant(f64),
    Sequence(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QuerySpec {
    /// `"a:b:n"`.
    Range(String),
    List(Vec<f64>),
    Polar(Vec<[f64; 2]>),
    Lattice { r: String, phi: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExactSpec {
    Expr(String),
    Oracle { oracle: String },
}

/// The file format, field for field.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonlinearity: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_scheme: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<KappaSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub queries: Option<QuerySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<ExactSpec>,
    /// Expected grid iterate after `m` layers, in `m` and `x`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer_law: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<usize>,
}

impl RawConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }
}

/// Command-line overrides; each replaces the matching config key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub grid: Option<usize>,
    pub layers: Option<usize>,
    pub kappa: Option<f64>,
    pub scheme: Option<String>,
    pub queries: Option<String>,
    pub sweep: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, raw: &mut RawConfig) {
        if let Some(n) = self.grid {
            if raw.kind == "laplace_disc" {
                raw.theta_n = Some(n);
            } else {
                raw.grid_n = Some(n);
            }
        }
        if let Some(m) = self.layers {
            raw.layers = Some(m);
        }
        if let Some(k) = self.kappa {
            raw.kappa = Some(KappaSpec::Constant(k));
        }
        if let Some(s) = &self.scheme {
            raw.grid_scheme = Some(s.clone());
        }
        if let Some(q) = &self.queries {
            raw.queries = Some(match q.split_once(',') {
                Some((r, phi)) if raw.kind == "laplace_disc" => QuerySpec::Lattice {
                    r: r.trim().to_owned(),
                    phi: phi.trim().to_owned(),
                },
                _ => QuerySpec::Range(q.clone()),
            });
        }
        if let Some(s) = self.sweep {
            raw.sweep = Some(s);
        }
    }
}

/// A parsed expression together with the variables it may use.
#[derive(Debug, Clone, PartialEq)]
pub struct Formula {
    pub source: String,
    pub expr: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Exact {
    Formula(Formula),
    AiryBvp,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Queries {
    Points(Vec<f64>),
    Polar(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    Linear {
        kernel: Formula,
        source: Formula,
        domain: (f64, f64),
    },
    Nonlinear {
        kernel: Formula,
        source: Formula,
        nonlinearity: Formula,
        domain: (f64, f64),
        outer_iterations: usize,
    },
    Bvp {
        g: Formula,
        h: Formula,
        alpha: f64,
        beta: f64,
    },
    LaplaceDisc {
        boundary: Formula,
    },
}

/// A validated problem description.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub name: Option<String>,
    pub problem: Problem,
    pub grid_n: usize,
    pub scheme: Scheme,
    pub layers: usize,
    pub schedule: KmSchedule,
    pub queries: Queries,
    pub exact: Option<Exact>,
    pub layer_law: Option<Formula>,
    pub sweep: Option<usize>,
    /// The effective configuration after overrides, echoed into reports.
    pub raw: RawConfig,
}

impl ProblemSpec {
    pub fn kind(&self) -> &'static str {
        match self.problem {
            Problem::Linear { .. } => "linear_fie",
            Problem::Nonlinear { .. } => "nonlinear_fie",
            Problem::Bvp { .. } => "bvp",
            Problem::LaplaceDisc { .. } => "laplace_disc",
        }
    }
}

fn invalid(key: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("key `{key}`: {reason}"))
}

fn require<T: Clone>(v: &Option<T>, key: &str, kind: &str) -> Result<T, CliError> {
    v.clone()
        .ok_or_else(|| invalid(key, format!("required for kind `{kind}`")))
}

fn forbid<T>(v: &Option<T>, key: &str, kind: &str) -> Result<(), CliError> {
    match v {
        Some(_) => Err(invalid(key, format!("not used by kind `{kind}`"))),
        None => Ok(()),
    }
}

/// Parses `source` and checks its free variables against `allowed`.
pub fn formula(source: &str, key: &str, allowed: &[&str]) -> Result<Formula, CliError> {
    let expr = exprlang::parse(source).map_err(|e| invalid(key, e))?;
    let allowed: BTreeSet<&str> = allowed.iter().copied().collect();
    if let Some(bad) = expr.free_vars().iter().find(|v| !allowed.contains(v.as_str())) {
        let list: Vec<&str> = allowed.into_iter().collect();
        return Err(invalid(
            key,
            format!("unknown variable `{bad}` (allowed: {})", list.join(", ")),
        ));
    }
    Ok(Formula {
        source: source.to_owned(),
        expr,
    })
}

/// Parses `"a:b:n"` into `n` evenly spaced points from `a` to `b` inclusive.
pub fn parse_range(text: &str, key: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = text.split(':').map(str::trim).collect();
    let [a, b, n] = parts.as_slice() else {
        return Err(invalid(key, format!("expected `a:b:n`, got `{text}`")));
    };
    let a: f64 = a.parse().map_err(|_| invalid(key, format!("bad start `{a}`")))?;
    let b: f64 = b.parse().map_err(|_| invalid(key, format!("bad end `{b}`")))?;
    let n: usize = n.parse().map_err(|_| invalid(key, format!("bad count `{n}`")))?;
    if !(a.is_finite() && b.is_finite()) || n == 0 || (n > 1 && b < a) {
        return Err(invalid(key, format!("invalid range `{text}`")));
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    let mut pts: Vec<f64> = (0..n)
        .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
        .collect();
    pts[n - 1] = b;
    Ok(pts)
}

fn interval(domain: Option<[f64; 2]>, kind: &str) -> Result<(f64, f64), CliError> {
    let [a, b] = require(&domain, "domain", kind)?;
    if !(a.is_finite() && b.is_finite() && b > a) {
        return Err(invalid("domain", "must be [a, b] with finite a < b"));
    }
    Ok((a, b))
}

pub fn validate(raw: RawConfig) -> Result<ProblemSpec, CliError> {
    let kind = raw.kind.as_str();
    let layers = require(&raw.layers, "layers", kind)?;
    if layers < 1 {
        return Err(invalid("layers", "must be at least 1"));
    }
    let laplace = kind == "laplace_disc";

    let problem = match kind {
        "linear_fie" | "nonlinear_fie" => {
            forbid(&raw.g, "g", kind)?;
            forbid(&raw.boundary, "boundary", kind)?;
            let domain = interval(raw.domain, kind)?;
            let kernel = formula(&require(&raw.kernel, "kernel", kind)?, "kernel", &["x", "z"])?;
            let source = formula(&require(&raw.source, "source", kind)?, "source", &["x"])?;
            if kind == "linear_fie" {
                forbid(&raw.nonlinearity, "nonlinearity", kind)?;
                forbid(&raw.outer_iterations, "outer_iterations", kind)?;
                Problem::Linear {
                    kernel,
                    source,
                    domain,
                }
            } else {
                let nonlinearity = formula(
                    &require(&raw.nonlinearity, "nonlinearity", kind)?,
                    "nonlinearity",
                    &["u"],
                )?;
                let outer_iterations = require(&raw.outer_iterations, "outer_iterations", kind)?;
                if outer_iterations < 1 {
                    return Err(invalid("outer_iterations", "must be at least 1"));
                }
                Problem::Nonlinear {
                    kernel,
                    source,
                    nonlinearity,
                    domain,
                    outer_iterations,
                }
            }
        }
        "bvp" => {
            for (v, k) in [(&raw.kernel, "kernel"), (&raw.source, "source"), (&raw.boundary, "boundary")] {
                forbid(v, k, kind)?;
            }
            if let Some(d) = raw.domain {
                if d != [0.0, 1.0] {
                    return Err(invalid("domain", "boundary value problems are posed on [0, 1]"));
                }
            }
            let alpha = require(&raw.alpha, "alpha", kind)?;
            let beta = require(&raw.beta, "beta", kind)?;
            if !(alpha.is_finite() && beta.is_finite()) {
                return Err(invalid("alpha", "boundary values must be finite"));
            }
            Problem::Bvp {
                g: formula(&require(&raw.g, "g", kind)?, "g", &["x"])?,
                h: formula(&require(&raw.h, "h", kind)?, "h", &["x"])?,
                alpha,
                beta,
            }
        }
        "laplace_disc" => {
            for (v, k) in [(&raw.kernel, "kernel"), (&raw.source, "source"), (&raw.g, "g")] {
                forbid(v, k, kind)?;
            }
            forbid(&raw.grid_n, "grid_n", kind)?;
            forbid(&raw.domain, "domain", kind)?;
            Problem::LaplaceDisc {
                boundary: formula(&require(&raw.boundary, "boundary", kind)?, "boundary", &["phi"])?,
            }
        }
        other => {
            return Err(invalid(
                "kind",
                format!("unknown kind `{other}` (expected linear_fie, nonlinear_fie, bvp or laplace_disc)"),
            ))
        }
    };

    let grid_n = if laplace {
        require(&raw.theta_n, "theta_n", kind)?
    } else {
        forbid(&raw.theta_n, "theta_n", kind)?;
        require(&raw.grid_n, "grid_n", kind)?
    };
    if grid_n < 3 {
        return Err(invalid(if laplace { "theta_n" } else { "grid_n" }, "need at least 3 nodes"));
    }

    let scheme: Scheme = match &raw.grid_scheme {
        None => Scheme::Left,
        Some(s) => s.parse().map_err(|e| invalid("grid_scheme", e))?,
    };
    if laplace && scheme != Scheme::Left {
        return Err(invalid("grid_scheme", "the θ-grid is always left-node periodic"));
    }

    let schedule = match &raw.kappa {
        None if laplace => KmSchedule::Constant(fredholm_core::laplace::DEFAULT_KAPPA),
        None => KmSchedule::Constant(1.0),
        Some(KappaSpec::Constant(k)) => KmSchedule::Constant(*k),
        Some(KappaSpec::Sequence(ks)) => KmSchedule::Sequence(ks.clone()),
    };
    schedule.validate().map_err(|e| invalid("kappa", e))?;

    let queries = match (&problem, &raw.queries) {
        (Problem::LaplaceDisc { .. }, None) => Queries::Polar(lattice("0:1:11", "0:6.283185307179586:33")?),
        (Problem::LaplaceDisc { .. }, Some(q)) => Queries::Polar(match q {
            QuerySpec::Lattice { r, phi } => lattice(r, phi)?,
            QuerySpec::Polar(pts) => pts.iter().map(|p| (p[0], p[1])).collect(),
            _ => {
                return Err(invalid(
                    "queries",
                    "laplace_disc expects a list of [r, phi] pairs or {\"r\": \"a:b:n\", \"phi\": \"a:b:n\"}",
                ))
            }
        }),
        (p, q) => {
            let (a, b) = match p {
                Problem::Linear { domain, .. } | Problem::Nonlinear { domain, .. } => *domain,
                _ => (0.0, 1.0),
            };
            let pts = match q {
                None => parse_range(&format!("{a}:{b}:201"), "queries")?,
                Some(QuerySpec::Range(s)) => parse_range(s, "queries")?,
                Some(QuerySpec::List(v)) => v.clone(),
                Some(_) => return Err(invalid("queries", "expected `a:b:n` or a list of points")),
            };
            if let Some(x) = pts.iter().find(|x| !(**x >= a && **x <= b)) {
                return Err(invalid("queries", format!("point {x} lies outside [{a}, {b}]")));
            }
            Queries::Points(pts)
        }
    };
    if let Queries::Polar(pts) = &queries {
        if let Some(p) = pts.iter().find(|p| !(p.0 >= 0.0 && p.0 <= 1.0 && p.1.is_finite())) {
            return Err(invalid("queries", format!("({}, {}) is outside the unit disc", p.0, p.1)));
        }
    }

    let exact = match &raw.exact {
        None => None,
        Some(ExactSpec::Oracle { oracle }) => match oracle.as_str() {
            "airy_bvp" => Some(Exact::AiryBvp),
            other => return Err(invalid("exact", format!("unknown oracle `{other}` (known: airy_bvp)"))),
        },
        Some(ExactSpec::Expr(s)) => {
            let vars: &[&str] = if laplace { &["r", "phi", "x", "y"] } else { &["x"] };
            Some(Exact::Formula(formula(s, "exact", vars)?))
        }
    };
    let layer_law = match &raw.layer_law {
        None => None,
        Some(s) => Some(formula(s, "layer_law", &["m", "x"])?),
    };
    if raw.sweep == Some(0) {
        return Err(invalid("sweep", "must be at least 1"));
    }

    Ok(ProblemSpec {
        name: raw.name.clone(),
        problem,
        grid_n,
        scheme,
        layers,
        schedule,
        queries,
        exact,
        layer_law,
        sweep: raw.sweep,
        raw,
    })
}

fn lattice(r: &str, phi: &str) -> Result<Vec<(f64, f64)>, CliError> {
    let rs = parse_range(r, "queries.r")?;
    let ps = parse_range(phi, "queries.phi")?;
    Ok(rs.iter().flat_map(|&r| ps.iter().map(move |&p| (r, p))).collect())
}

pub fn load(text: &str, overrides: &Overrides) -> Result<ProblemSpec, CliError> {
    let mut raw = RawConfig::from_json(text)?;
    overrides.apply(&mut raw);
    validate(raw)
}
