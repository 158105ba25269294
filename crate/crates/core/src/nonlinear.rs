//! Nonlinear equations `f(x) = g(x) + ∫K(x,z) G(f(z)) dz` by repeated
//! re-linearization: each outer pass solves the linear equation
//! `f = 𝓛f̃ + ∫K f` with `𝓛f̃ = g + ∫K (G(f̃) − f̃)`, reusing one network.

use crate::grid::Grid1D;
use crate::linalg::max_abs_diff;
use crate::net::{FredholmNet, QueryLayer, SolutionField};
use crate::operator::{discretize, DiscreteOperator, FieProblem, KmSchedule};
use crate::{Error, Fn1};

/// Per-pass record of the outer loop.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationTrace {
    /// Number of re-linearization passes performed (`n` in `f_n`).
    pub outer_iterations: usize,
    /// `‖f_n − f_{n−1}‖_∞` for `n = 1..`.
    pub deltas: Vec<f64>,
    /// Source vectors `g_0, g_1, …` used by each linear solve.
    pub sources: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NonlinearOptions {
    /// Stop once a delta drops below this value. Off by default.
    pub early_stop: Option<f64>,
}

fn apply_g(g: &Fn1, f: &[f64]) -> Result<Vec<f64>, Error> {
    f.iter()
        .enumerate()
        .map(|(i, &u)| {
            let v = g
                .eval(u)
                .map_err(|e| Error::from(e).context(format!("nonlinearity at node {i} (u = {u})")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite {
                    what: "nonlinearity".into(),
                    location: format!("node {i} (u = {u})"),
                })
            }
        })
        .collect()
}

/// `g(z_i) + Σ_j A_ij (G(f_j) − f_j)`.
pub fn linearized_source(
    op: &DiscreteOperator,
    nonlinearity: &Fn1,
    f_prev: &[f64],
) -> Result<Vec<f64>, Error> {
    if f_prev.len() != op.len() {
        return Err(Error::invalid("previous iterate is not on the operator grid"));
    }
    let gf = apply_g(nonlinearity, f_prev)?;
    let correction: Vec<f64> = gf.iter().zip(f_prev).map(|(a, b)| a - b).collect();
    let ac = op.apply_matrix(&correction);
    Ok(op
        .source_vector()
        .iter()
        .zip(&ac)
        .map(|(g, c)| g + c)
        .collect())
}

#[derive(Debug, Clone)]
pub struct NonlinearSolution {
    pub field: SolutionField,
    pub trace: IterationTrace,
    /// The iterate the last source vector was linearized around.
    linearized_at: Vec<f64>,
    net: FredholmNet,
    nonlinearity: Fn1,
}

impl NonlinearSolution {
    /// Output layer of the last linear solve at arbitrary points:
    /// `g(x) + Σ_j K(x,z_j)Δz (G(f̃_j) − f̃_j + f_j)`.
    pub fn query(&self, points: &[f64]) -> Result<Vec<f64>, Error> {
        let layer: QueryLayer = self.net.query_layer(points)?;
        let gf = apply_g(&self.nonlinearity, &self.linearized_at)?;
        let v: Vec<f64> = gf
            .iter()
            .zip(&self.linearized_at)
            .zip(&self.field.values)
            .map(|((g, p), f)| g - p + f)
            .collect();
        Ok(layer.apply(&v))
    }

    pub fn network(&self) -> &FredholmNet {
        &self.net
    }
}

/// Runs the outer loop: one initial linear solve with `g`, then
/// `outer_iterations` re-linearized solves.
pub fn solve_nonlinear(
    problem: &FieProblem,
    outer_iterations: usize,
    layers: usize,
    grid: &Grid1D,
    schedule: KmSchedule,
    options: NonlinearOptions,
) -> Result<NonlinearSolution, Error> {
    let nonlinearity = problem
        .nonlinearity
        .clone()
        .ok_or_else(|| Error::invalid("problem has no nonlinearity"))?;
    if outer_iterations < 1 {
        return Err(Error::invalid("need at least one outer iteration"));
    }
    let op = discretize(problem, grid)?;
    let g0 = op.source_vector().to_vec();
    let net = FredholmNet::build(op.clone(), layers, schedule)?;

    let mut field = net.forward()?;
    let mut linearized_at = vec![0.0; op.len()];
    let mut trace = IterationTrace {
        outer_iterations: 0,
        deltas: Vec::with_capacity(outer_iterations),
        sources: vec![g0],
    };
    for n in 1..=outer_iterations {
        let g_n = linearized_source(&op, &nonlinearity, &field.values)
            .map_err(|e| e.context(format!("outer iteration {n}")))?;
        let next = net
            .forward_with_source(&g_n, false)
            .map_err(|e| e.context(format!("outer iteration {n}")))?;
        let delta = max_abs_diff(&next.values, &field.values);
        linearized_at = std::mem::replace(&mut field, next).values;
        trace.sources.push(g_n);
        trace.deltas.push(delta);
        trace.outer_iterations = n;
        if options.early_stop.is_some_and(|tol| delta < tol) {
            break;
        }
    }
    Ok(NonlinearSolution {
        field,
        trace,
        linearized_at,
        net,
        nonlinearity,
    })
}
