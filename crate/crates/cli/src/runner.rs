//! Dispatch from a validated [`ProblemSpec`] to the solver pipelines.

use std::path::Path;
use std::time::Instant;

use fredholm_core::bvp::{airy_bvp_exact, solve_bvp, BvpSpec};
use fredholm_core::fd::{solve_fd, FdOptions, PolarGrid};
use fredholm_core::laplace::{
    build_bie, evaluate_potential, solve_density, DensityInterpolation, DiscBoundaryProblem,
};
use fredholm_core::linalg::Execution;
use fredholm_core::net::{error_bound, km_error_estimate, layer_sweep, ErrorBudget, FredholmNet};
use fredholm_core::nonlinear::{solve_nonlinear, NonlinearOptions};
use fredholm_core::operator::{discretize, estimate_contraction, FieProblem, KmSchedule};
use fredholm_core::{Error, Fn1, Fn2, Grid1D, Topology};

use crate::config::{self, Exact, Formula, KappaSpec, Overrides, Problem, ProblemSpec, Queries};
use crate::error::CliError;
use crate::registry;
use crate::report::{LawEntry, Metadata, ReportBundle, Row, SweepEntry};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Sequential kernels and no wall-clock fields in the report.
    pub deterministic: bool,
}

impl RunOptions {
    fn execution(&self) -> Execution {
        if self.deterministic {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

pub fn run_problem(path: &Path, overrides: &Overrides, opts: RunOptions) -> Result<ReportBundle, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    run_spec(&config::load(&text, overrides)?, opts)
}

pub fn run_example(name: &str, overrides: &Overrides, opts: RunOptions) -> Result<ReportBundle, CliError> {
    run_spec(&registry::load(name, overrides)?, opts)
}

fn fn1(f: &Formula, var: &str) -> Result<Fn1, CliError> {
    Fn1::from_expr(&f.expr, var).map_err(|e| CliError::from(Error::from(e)))
}

fn fn2(f: &Formula) -> Result<Fn2, CliError> {
    Fn2::from_expr(&f.expr, "x", "z").map_err(|e| CliError::from(Error::from(e)))
}

fn with_context(what: &str) -> impl Fn(Error) -> CliError + '_ {
    move |e| CliError::from(e.context(what.to_owned()))
}

/// Reference values at the query points.
fn exact_values(spec: &ProblemSpec) -> Result<Option<Vec<f64>>, CliError> {
    let Some(exact) = &spec.exact else {
        return Ok(None);
    };
    let values = match (&spec.queries, exact) {
        (Queries::Points(xs), Exact::AiryBvp) => xs.iter().map(|&x| airy_bvp_exact(x)).collect(),
        (Queries::Points(xs), Exact::Formula(f)) => {
            let f = fn1(f, "x")?;
            xs.iter()
                .map(|&x| f.eval(x).map_err(|e| with_context("exact solution")(e.into())))
                .collect::<Result<_, _>>()?
        }
        (Queries::Polar(pts), Exact::Formula(f)) => {
            let c = f.expr.compile(&["r", "phi", "x", "y"]).map_err(|e| CliError::from(Error::from(e)))?;
            pts.iter()
                .map(|&(r, p)| {
                    c.eval(&[r, p, r * p.cos(), r * p.sin()])
                        .map_err(|e| with_context("exact solution")(e.into()))
                })
                .collect::<Result<_, _>>()?
        }
        (Queries::Polar(_), Exact::AiryBvp) => {
            return Err(CliError::Validation("key `exact`: airy_bvp is a 1-D oracle".into()))
        }
    };
    Ok(Some(values))
}

fn grid(spec: &ProblemSpec, a: f64, b: f64) -> Result<Grid1D, CliError> {
    Grid1D::uniform(a, b, spec.grid_n, spec.scheme, Topology::Interval)
        .map_err(|e| CliError::from(Error::from(e)))
}

fn points(spec: &ProblemSpec) -> &[f64] {
    match &spec.queries {
        Queries::Points(xs) => xs,
        Queries::Polar(_) => &[],
    }
}

fn kappa_meta(s: &KmSchedule) -> KappaSpec {
    match s {
        KmSchedule::Constant(k) => KappaSpec::Constant(*k),
        KmSchedule::Sequence(v) => KappaSpec::Sequence(v.clone()),
    }
}

/// Network output at the query points plus whatever the pipeline reports.
struct Evaluation {
    values: Vec<f64>,
    meta: Metadata,
}

fn evaluate(spec: &ProblemSpec, opts: RunOptions) -> Result<Evaluation, CliError> {
    let mut meta = Metadata::default();
    let values = match &spec.problem {
        Problem::Linear {
            kernel,
            source,
            domain,
        } => {
            let problem = FieProblem::linear(fn2(kernel)?, fn1(source, "x")?, domain.0, domain.1);
            let op = discretize(&problem, &grid(spec, domain.0, domain.1)?)
                .map_err(with_context("discretization"))?
                .with_execution(opts.execution());
            let budget = ErrorBudget::from_operator(&op).map_err(with_context("error budget"))?;
            meta.q_est = Some(budget.q);
            meta.residual = Some(budget.residual);
            meta.slope_bound = Some(budget.d);
            if budget.q < 1.0 {
                meta.error_bound = error_bound(&budget, spec.layers).ok();
                meta.km_estimate = km_error_estimate(&budget, &spec.schedule, spec.layers).ok();
            } else {
                meta.warnings.push(format!(
                    "contraction estimate q = {} ≥ 1: no a priori bound",
                    budget.q
                ));
            }
            let net = FredholmNet::build(op, spec.layers, spec.schedule.clone())?;
            meta.grid_iterations = Some(net.grid_iterations());
            let field = if spec.layer_law.is_some() {
                net.forward_with_history()?
            } else {
                net.forward()?
            };
            if let (Some(law), Some(history)) = (&spec.layer_law, &field.history) {
                let c = law.expr.compile(&["m", "x"]).map_err(|e| CliError::from(Error::from(e)))?;
                let mut rows = Vec::with_capacity(history.len());
                for (m, h) in history.iter().enumerate() {
                    let mut dev = 0.0f64;
                    for (&z, &v) in field.grid.nodes().iter().zip(h) {
                        let expected = c
                            .eval(&[(m + 1) as f64, z])
                            .map_err(|e| with_context("layer_law")(e.into()))?;
                        dev = dev.max((v - expected).abs());
                    }
                    rows.push(LawEntry {
                        layer: m + 1,
                        max_dev: dev,
                    });
                }
                meta.layer_law = Some(rows);
            }
            net.query(&field, points(spec)).map_err(with_context("query layer"))?
        }
        Problem::Nonlinear {
            kernel,
            source,
            nonlinearity,
            domain,
            outer_iterations,
        } => {
            let problem = FieProblem::linear(fn2(kernel)?, fn1(source, "x")?, domain.0, domain.1)
                .with_nonlinearity(fn1(nonlinearity, "u")?);
            let g = grid(spec, domain.0, domain.1)?;
            let sol = solve_nonlinear(
                &problem,
                *outer_iterations,
                spec.layers,
                &g,
                spec.schedule.clone(),
                NonlinearOptions::default(),
            )?;
            meta.q_est = Some(estimate_contraction(&discretize(&problem, &g)?));
            meta.grid_iterations = Some(sol.network().grid_iterations());
            meta.outer_iterations = Some(sol.trace.outer_iterations);
            meta.outer_deltas = Some(sol.trace.deltas.clone());
            sol.query(points(spec)).map_err(with_context("query layer"))?
        }
        Problem::Bvp { g, h, alpha, beta } => {
            let bvp = BvpSpec {
                g: fn1(g, "x")?,
                h: fn1(h, "x")?,
                alpha: *alpha,
                beta: *beta,
            };
            let sol = solve_bvp(&bvp, &grid(spec, 0.0, 1.0)?, spec.layers, spec.schedule.clone(), points(spec))?;
            meta.q_est = Some(sol.q_est);
            meta.grid_iterations = Some(spec.layers - 1);
            meta.warnings = sol.warnings;
            sol.y
        }
        Problem::LaplaceDisc { boundary } => {
            let Queries::Polar(pts) = &spec.queries else {
                return Err(CliError::Validation("key `queries`: expected polar points".into()));
            };
            let problem = DiscBoundaryProblem::new(fn1(boundary, "phi")?, spec.grid_n, spec.layers)
                .with_schedule(spec.schedule.clone());
            meta.q_est = Some(estimate_contraction(&build_bie(&problem)?));
            meta.grid_iterations = Some(spec.layers - 1);
            let density = solve_density(&problem)?;
            evaluate_potential(&density, pts, DensityInterpolation::Nystrom)
                .map_err(with_context("potential evaluation"))?
                .values
        }
    };
    if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
        return Err(CliError::Numerical(format!(
            "non-finite network output at query point {bad}"
        )));
    }
    Ok(Evaluation { values, meta })
}

fn sweep(spec: &ProblemSpec, max_layers: usize, exact: Option<&[f64]>, opts: RunOptions) -> Result<Vec<SweepEntry>, CliError> {
    if let Problem::Linear {
        kernel,
        source,
        domain,
    } = &spec.problem
    {
        let problem = FieProblem::linear(fn2(kernel)?, fn1(source, "x")?, domain.0, domain.1);
        let op = discretize(&problem, &grid(spec, domain.0, domain.1)?)?.with_execution(opts.execution());
        let reference = match &spec.exact {
            Some(Exact::Formula(f)) => Some(fn1(f, "x")?),
            Some(Exact::AiryBvp) => Some(Fn1::native("airy_bvp", airy_bvp_exact)),
            None => None,
        };
        let rows = layer_sweep(&op, &spec.schedule, max_layers, points(spec), reference.as_ref())?;
        return Ok(rows
            .into_iter()
            .map(|r| SweepEntry {
                layers: r.layers,
                max_err: r.metric,
            })
            .collect());
    }
    let mut rows = Vec::with_capacity(max_layers);
    let mut previous: Option<Vec<f64>> = None;
    for m in 1..=max_layers {
        let mut s = spec.clone();
        s.layers = m;
        let values = evaluate(&s, opts)?.values;
        let max_err = match (exact, &previous) {
            (Some(e), _) => max_diff(&values, e),
            (None, Some(p)) => max_diff(&values, p),
            (None, None) => values.iter().fold(0.0f64, |a, v| a.max(v.abs())),
        };
        rows.push(SweepEntry { layers: m, max_err });
        previous = Some(values);
    }
    Ok(rows)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

pub fn run_spec(spec: &ProblemSpec, opts: RunOptions) -> Result<ReportBundle, CliError> {
    let start = Instant::now();
    let exact = exact_values(spec)?;
    let Evaluation { values, mut meta } = evaluate(spec, opts)?;

    let solution: Vec<Row> = match &spec.queries {
        Queries::Points(xs) => xs
            .iter()
            .enumerate()
            .map(|(i, &x)| Row::at_x(x, values[i], exact.as_ref().map(|e| e[i])))
            .collect(),
        Queries::Polar(pts) => pts
            .iter()
            .enumerate()
            .map(|(i, &(r, p))| Row::at_polar(r, p, values[i], exact.as_ref().map(|e| e[i])))
            .collect(),
    };
    let sweep = match spec.sweep {
        Some(m) => Some(sweep(spec, m, exact.as_deref(), opts)?),
        None => None,
    };

    meta.kind = spec.kind().to_owned();
    meta.name = spec.name.clone();
    meta.grid_n = Some(spec.grid_n);
    meta.scheme = Some(spec.scheme.name().to_owned());
    meta.layers = Some(spec.layers);
    meta.kappa = Some(kappa_meta(&spec.schedule));
    meta.config = Some(spec.raw.clone());
    let mut bundle = ReportBundle {
        solution,
        sweep,
        metadata: meta,
    };
    bundle.metadata.max_abs_err = bundle.max_abs_err();
    if !opts.deterministic {
        bundle.metadata.timing_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(bundle)
}

/// Settings of the finite-difference comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct FdCompare {
    pub boundary: String,
    pub exact: Option<String>,
    pub nr: usize,
    pub ntheta: usize,
    /// Also solve on the half-resolution grid and report the error ratio.
    pub refine: bool,
    /// Network settings for the side-by-side boundary-integral solution.
    pub theta_n: usize,
    pub layers: usize,
    pub kappa: f64,
}

impl Default for FdCompare {
    fn default() -> Self {
        Self {
            boundary: "1 + cos(2*phi)".into(),
            exact: Some("x^2 - y^2 + 1".into()),
            nr: 200,
            ntheta: 200,
            refine: false,
            theta_n: 2000,
            layers: 15,
            kappa: fredholm_core::laplace::DEFAULT_KAPPA,
        }
    }
}

fn fd_error(grid: &PolarGrid, exact: &dyn Fn(f64, f64) -> Result<f64, CliError>) -> Result<(f64, f64), CliError> {
    let s = grid.samples();
    let mut max = 0.0f64;
    let mut sum = 0.0;
    for (&(r, p), &v) in s.points.iter().zip(&s.values) {
        let d = (v - exact(r, p)?).abs();
        max = max.max(d);
        sum += d;
    }
    Ok((max, sum / s.points.len() as f64))
}

/// Solves the disc problem with the polar finite-difference reference and
/// reports it against the exact solution and the network solution.
pub fn compare_fd(cfg: &FdCompare, opts: RunOptions) -> Result<ReportBundle, CliError> {
    let start = Instant::now();
    let boundary = config::formula(&cfg.boundary, "boundary", &["phi"])?;
    let exact = match &cfg.exact {
        Some(s) => Some(
            config::formula(s, "exact", &["r", "phi", "x", "y"])?
                .expr
                .compile(&["r", "phi", "x", "y"])
                .map_err(|e| CliError::from(Error::from(e)))?,
        ),
        None => None,
    };
    let exact_at = |r: f64, p: f64| -> Result<f64, CliError> {
        let c = exact.as_ref().expect("checked by caller");
        c.eval(&[r, p, r * p.cos(), r * p.sin()])
            .map_err(|e| with_context("exact solution")(e.into()))
    };
    let f = fn1(&boundary, "phi")?;
    let options = FdOptions::default();
    let fd = solve_fd(&f, cfg.nr, cfg.ntheta, options).map_err(with_context("finite-difference solve"))?;

    let mut meta = Metadata {
        kind: "compare_fd".into(),
        grid_n: Some(cfg.theta_n),
        layers: Some(cfg.layers),
        kappa: Some(KappaSpec::Constant(cfg.kappa)),
        ..Default::default()
    };
    meta.extra.insert("fd_nr".into(), cfg.nr as f64);
    meta.extra.insert("fd_ntheta".into(), cfg.ntheta as f64);
    meta.extra.insert("fd_iterations".into(), fd.iterations as f64);
    meta.extra.insert("fd_residual".into(), fd.residual);

    // a sub-lattice of the FD nodes carries the table and the network comparison
    let ring_step = (cfg.nr / 100).max(1);
    let angle_step = (cfg.ntheta / 100).max(1);
    let mut nodes = vec![(0usize, 0usize)];
    for i in (ring_step..=cfg.nr).step_by(ring_step) {
        for j in (0..cfg.ntheta).step_by(angle_step) {
            nodes.push((i, j));
        }
    }
    let pts: Vec<(f64, f64)> = nodes.iter().map(|&(i, j)| (fd.radius(i), fd.angle(j))).collect();
    let problem = DiscBoundaryProblem::new(f.clone(), cfg.theta_n, cfg.layers)
        .with_schedule(KmSchedule::Constant(cfg.kappa));
    let density = solve_density(&problem)?;
    let fnn = evaluate_potential(&density, &pts, DensityInterpolation::Nystrom)?.values;
    let fd_vals: Vec<f64> = nodes.iter().map(|&(i, j)| fd.value(i, j)).collect();
    meta.extra.insert("fnn_vs_fd_max".into(), max_diff(&fnn, &fd_vals));

    let mut solution = Vec::with_capacity(pts.len());
    for (k, &(r, p)) in pts.iter().enumerate() {
        let e = match exact {
            Some(_) => Some(exact_at(r, p)?),
            None => None,
        };
        solution.push(Row::at_polar(r, p, fd_vals[k], e));
    }
    if exact.is_some() {
        let (max, mean) = fd_error(&fd, &exact_at)?;
        meta.extra.insert("fd_max_err".into(), max);
        meta.extra.insert("fd_mean_err".into(), mean);
        let mut fnn_err = 0.0f64;
        for (k, &(r, p)) in pts.iter().enumerate() {
            fnn_err = fnn_err.max((fnn[k] - exact_at(r, p)?).abs());
        }
        meta.extra.insert("fnn_max_err".into(), fnn_err);
        if cfg.refine {
            let coarse = solve_fd(&f, cfg.nr / 2, cfg.ntheta / 2, options)
                .map_err(with_context("coarse finite-difference solve"))?;
            let (cmax, _) = fd_error(&coarse, &exact_at)?;
            meta.extra.insert("fd_max_err_coarse".into(), cmax);
            meta.extra.insert("refinement_ratio".into(), cmax / max);
        }
    }
    let mut bundle = ReportBundle {
        solution,
        sweep: None,
        metadata: meta,
    };
    bundle.metadata.max_abs_err = bundle.max_abs_err();
    if !opts.deterministic {
        bundle.metadata.timing_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(text: &str) -> ProblemSpec {
        config::load(text, &Overrides::default()).unwrap()
    }

    #[test]
    fn zero_kernel_returns_the_source() {
        let spec = small(
            r#"{"kind":"linear_fie","domain":[0,2],"kernel":"0","source":"x^2 + 1","grid_n":20,
                "layers":3,"queries":"0:2:9","exact":"x^2 + 1"}"#,
        );
        let b = run_spec(&spec, RunOptions { deterministic: true }).unwrap();
        for row in &b.solution {
            assert_eq!(Some(row.value), row.exact);
            assert_eq!(row.abs_err, Some(0.0));
        }
        assert_eq!(b.metadata.timing_ms, None);
        assert_eq!(b.metadata.q_est, Some(0.0));
    }

    #[test]
    fn sweep_rows_cover_each_layer_count() {
        let spec = small(
            r#"{"kind":"bvp","g":"x","h":"0","alpha":0,"beta":2,"grid_n":200,"layers":3,
                "sweep":4,"exact":{"oracle":"airy_bvp"},"queries":"0:1:11"}"#,
        );
        let b = run_spec(&spec, RunOptions::default()).unwrap();
        let sweep = b.sweep.unwrap();
        assert_eq!(sweep.iter().map(|s| s.layers).collect::<Vec<_>>(), [1, 2, 3, 4]);
        assert!(sweep[3].max_err < sweep[0].max_err);
        assert!(b.metadata.timing_ms.is_some());
        assert_eq!(sweep[2].max_err, b.metadata.max_abs_err.unwrap());
    }

    #[test]
    fn domain_errors_are_numerical() {
        let spec = small(
            r#"{"kind":"nonlinear_fie","domain":[0,1],"kernel":"1","source":"-5","nonlinearity":"sqrt(u)",
                "outer_iterations":2,"grid_n":10,"layers":2}"#,
        );
        let err = run_spec(&spec, RunOptions::default()).unwrap_err();
        assert_eq!(err.exit_code(), 3, "{err}");
    }

    #[test]
    fn small_fd_comparison() {
        let cfg = FdCompare {
            nr: 16,
            ntheta: 16,
            theta_n: 64,
            refine: true,
            ..Default::default()
        };
        let b = compare_fd(&cfg, RunOptions { deterministic: true }).unwrap();
        let ratio = b.metadata.extra["refinement_ratio"];
        assert!((3.0..=5.0).contains(&ratio), "{ratio}");
        assert!(b.metadata.extra["fnn_max_err"] < b.metadata.extra["fd_max_err"] / 10.0);
        assert_eq!(b.solution.len(), 1 + 16 * 16);
    }
}
