//! The discretized integral operator `(𝒯f)(x) = g(x) + ∫K(x,z)f(z)dz` and the
//! scalar estimates (contraction factor, residual, slope bound) that feed the
//! error budget.

use crate::grid::{Grid1D, Topology};
use crate::linalg::{norm_inf, DenseMatrix, Execution};
use crate::{Error, Fn1, Fn2};

/// A linear (or, with `nonlinearity`, nonlinear) Fredholm equation of the
/// second kind: `f(x) = g(x) + ∫_a^b K(x,z) G(f(z)) dz`.
#[derive(Debug, Clone)]
pub struct FieProblem {
    pub kernel: Fn2,
    pub source: Fn1,
    pub domain: (f64, f64),
    pub nonlinearity: Option<Fn1>,
}

impl FieProblem {
    pub fn linear(kernel: Fn2, source: Fn1, a: f64, b: f64) -> Self {
        Self {
            kernel,
            source,
            domain: (a, b),
            nonlinearity: None,
        }
    }

    pub fn with_nonlinearity(mut self, g: Fn1) -> Self {
        self.nonlinearity = Some(g);
        self
    }
}

/// `A_ij = K(z_i, z_j)·Δz` together with `g_i = g(z_i)`.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    a: DenseMatrix,
    g: Vec<f64>,
    grid: Grid1D,
    kernel: Fn2,
    source: Fn1,
    exec: Execution,
}

fn check_finite(v: f64, what: &str, location: impl FnOnce() -> String) -> Result<f64, Error> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            what: what.to_owned(),
            location: location(),
        })
    }
}

pub fn discretize(problem: &FieProblem, grid: &Grid1D) -> Result<DiscreteOperator, Error> {
    let (a, b) = problem.domain;
    if grid.a() != a || grid.b() != b {
        return Err(Error::invalid(format!(
            "grid [{}, {}] does not match the problem domain [{a}, {b}]",
            grid.a(),
            grid.b()
        )));
    }
    let z = grid.nodes();
    let n = z.len();
    let dz = grid.spacing();
    let mut mat = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let k = problem.kernel.eval(z[i], z[j]).map_err(|e| {
                Error::from(e).context(format!(
                    "kernel at node pair ({i}, {j}) = ({}, {})",
                    z[i], z[j]
                ))
            })?;
            mat[(i, j)] = check_finite(k, "kernel", || {
                format!("node pair ({i}, {j}) = ({}, {})", z[i], z[j])
            })? * dz;
        }
    }
    let mut g = Vec::with_capacity(n);
    for (i, &zi) in z.iter().enumerate() {
        let v = problem
            .source
            .eval(zi)
            .map_err(|e| Error::from(e).context(format!("source at node {i} = {zi}")))?;
        g.push(check_finite(v, "source", || format!("node {i} = {zi}"))?);
    }
    Ok(DiscreteOperator {
        a: mat,
        g,
        grid: grid.clone(),
        kernel: problem.kernel.clone(),
        source: problem.source.clone(),
        exec: Execution::Sequential,
    })
}

impl DiscreteOperator {
    /// Assembles an operator from precomputed parts. `kernel` and `source`
    /// must be consistent with `a` and `g`; they are used by the query layer.
    pub fn from_parts(
        a: DenseMatrix,
        g: Vec<f64>,
        grid: Grid1D,
        kernel: Fn2,
        source: Fn1,
    ) -> Result<Self, Error> {
        let n = grid.len();
        if a.rows() != n || a.cols() != n || g.len() != n {
            return Err(Error::invalid(format!(
                "operator parts do not match a grid of {n} nodes"
            )));
        }
        if !a.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "operator entries".into(),
                location: "assembled parts".into(),
            });
        }
        Ok(Self {
            a,
            g,
            grid,
            kernel,
            source,
            exec: Execution::Sequential,
        })
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    /// Same kernel and grid, different source vector.
    pub fn with_source_vector(&self, g: Vec<f64>) -> Result<Self, Error> {
        if g.len() != self.len() {
            return Err(Error::invalid("source vector has the wrong length"));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "source vector".into(),
                location: "replacement source".into(),
            });
        }
        let mut op = self.clone();
        op.g = g;
        Ok(op)
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn source_vector(&self) -> &[f64] {
        &self.g
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn kernel(&self) -> &Fn2 {
        &self.kernel
    }

    pub fn source(&self) -> &Fn1 {
        &self.source
    }

    pub fn execution(&self) -> Execution {
        self.exec
    }

    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    /// `A f`.
    pub fn apply_matrix(&self, f: &[f64]) -> Vec<f64> {
        self.a.matvec(f, self.exec)
    }

    pub(crate) fn into_parts(self) -> (DenseMatrix, Vec<f64>, Grid1D, Fn2, Fn1, Execution) {
        (self.a, self.g, self.grid, self.kernel, self.source, self.exec)
    }
}

/// Relaxation parameters of the Krasnoselskii–Mann iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum KmSchedule {
    Constant(f64),
    /// `κ_1, κ_2, …` for layers `1, 2, …`.
    Sequence(Vec<f64>),
}

impl Default for KmSchedule {
    fn default() -> Self {
        KmSchedule::Constant(1.0)
    }
}

fn check_kappa(k: f64) -> Result<(), Error> {
    if k > 0.0 && k <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("κ = {k} is outside (0, 1]")))
    }
}

impl KmSchedule {
    pub fn validate(&self) -> Result<(), Error> {
        match self {
            KmSchedule::Constant(k) => check_kappa(*k),
            KmSchedule::Sequence(ks) => {
                if ks.is_empty() {
                    return Err(Error::invalid("κ sequence is empty"));
                }
                ks.iter().try_for_each(|&k| check_kappa(k))
            }
        }
    }

    /// Whether the KM convergence condition `Σκ_n(1−κ_n) = ∞` can be relied
    /// on. Constant κ < 1 satisfies it; κ ≡ 1 (plain successive
    /// approximation) only converges when the operator is a contraction, which
    /// the caller has to assert. A finite sequence is judged by its tail value.
    pub fn is_valid(&self, contractive: bool) -> bool {
        if self.validate().is_err() {
            return false;
        }
        let tail = match self {
            KmSchedule::Constant(k) => *k,
            KmSchedule::Sequence(ks) => ks[ks.len() - 1],
        };
        tail < 1.0 || contractive
    }

    /// κ for layer `m` (1-based). Sequences repeat their last entry.
    pub fn kappa(&self, m: usize) -> f64 {
        match self {
            KmSchedule::Constant(k) => *k,
            KmSchedule::Sequence(ks) => ks[(m.max(1) - 1).min(ks.len() - 1)],
        }
    }

    /// `v_M = Σ_{m=1}^{M} κ_m`.
    pub fn partial_sum(&self, layers: usize) -> f64 {
        (1..=layers).map(|m| self.kappa(m)).sum()
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, KmSchedule::Constant(_))
    }
}

/// One KM step on the grid: `κ g + (κ A + (1−κ) I) f`, i.e.
/// `(1−κ) f + κ 𝒯_d f` with `𝒯_d f = g + A f`.
pub fn apply_km_step(op: &DiscreteOperator, f: &[f64], kappa: f64) -> Result<Vec<f64>, Error> {
    check_kappa(kappa)?;
    if f.len() != op.len() {
        return Err(Error::invalid(format!(
            "iterate has {} entries, operator has {}",
            f.len(),
            op.len()
        )));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "iterate".into(),
            location: "KM step input".into(),
        });
    }
    let af = op.apply_matrix(f);
    Ok(af
        .iter()
        .zip(&op.g)
        .zip(f)
        .map(|((av, gv), fv)| kappa * (gv + av) + (1.0 - kappa) * fv)
        .collect())
}

/// `max_i Σ_j |A_ij|`, the discrete sup-norm contraction factor.
pub fn estimate_contraction(op: &DiscreteOperator) -> f64 {
    op.a.norm_inf()
}

/// `‖A g‖_∞`, the discrete `‖𝒯g − g‖`.
pub fn residual_norm(op: &DiscreteOperator) -> f64 {
    norm_inf(&op.apply_matrix(&op.g))
}

/// Finite-difference estimate of `D = max |∂_z [K(x,z) g(z)]|` over grid
/// pairs, using central differences in `z` (wrapped on periodic grids).
pub fn estimate_slope_bound(op: &DiscreteOperator) -> Result<f64, Error> {
    let n = op.len();
    if n < 3 {
        return Err(Error::invalid("slope estimate needs at least 3 nodes"));
    }
    let dz = op.grid.spacing();
    let periodic = op.grid.topology() == Topology::Periodic;
    let mut d: f64 = 0.0;
    let mut v = vec![0.0; n];
    for i in 0..n {
        for (j, vj) in v.iter_mut().enumerate() {
            *vj = op.a[(i, j)] / dz * op.g[j];
        }
        let range = if periodic { 0..n } else { 1..n - 1 };
        for j in range {
            let (lo, hi) = ((j + n - 1) % n, (j + 1) % n);
            d = d.max(((v[hi] - v[lo]) / (2.0 * dz)).abs());
        }
    }
    Ok(d)
}
