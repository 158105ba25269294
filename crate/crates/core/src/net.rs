//! The Fredholm neural network: hidden layers are KM iterations with weights
//! `W = κA + (1−κ)I` and bias `κg`; an output (query) layer applies the
//! discretized operator once at arbitrary points.

use crate::grid::{Grid1D, Topology};
use crate::linalg::{max_abs_diff, norm_inf, DenseMatrix, Execution, Lu};
use crate::operator::{
    estimate_contraction, estimate_slope_bound, residual_norm, DiscreteOperator, KmSchedule,
};
use crate::{Error, Fn1, Fn2};

/// What the first hidden layer emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Seed {
    /// `h_1 = κ_1 g`.
    #[default]
    Scaled,
    /// `h_1 = g`, the textbook KM starting point.
    Source,
}

/// Values of an approximate solution on the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionField {
    pub grid: Grid1D,
    pub values: Vec<f64>,
    /// `h_1, …, h_M` when requested.
    pub history: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone)]
enum HiddenWeights {
    /// One matrix `κA + (1−κ)I` shared by every layer.
    Shared(DenseMatrix),
    /// The bare matrix `A`; layer `m` forms `κ_m A h + (1−κ_m) h`.
    PerLayer(DenseMatrix),
}

#[derive(Debug, Clone)]
pub struct FredholmNet {
    layers: usize,
    schedule: KmSchedule,
    seed: Seed,
    weights: HiddenWeights,
    g: Vec<f64>,
    grid: Grid1D,
    kernel: Fn2,
    source: Fn1,
    exec: Execution,
}

const BLOWUP: f64 = 1e150;

impl FredholmNet {
    /// Builds an `M`-hidden-layer network from `op`. For a constant schedule
    /// the operator matrix is turned into the shared hidden weight in place.
    pub fn build(op: DiscreteOperator, layers: usize, schedule: KmSchedule) -> Result<Self, Error> {
        if layers < 1 {
            return Err(Error::invalid("a Fredholm network needs at least one hidden layer"));
        }
        schedule.validate()?;
        let (mut a, g, grid, kernel, source, exec) = op.into_parts();
        let weights = match schedule {
            KmSchedule::Constant(k) => {
                if k != 1.0 {
                    a.scale(k);
                    a.add_to_diagonal(1.0 - k);
                }
                HiddenWeights::Shared(a)
            }
            KmSchedule::Sequence(_) => HiddenWeights::PerLayer(a),
        };
        Ok(Self {
            layers,
            schedule,
            seed: Seed::Scaled,
            weights,
            g,
            grid,
            kernel,
            source,
            exec,
        })
    }

    pub fn with_seed(mut self, seed: Seed) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_layers(mut self, layers: usize) -> Result<Self, Error> {
        if layers < 1 {
            return Err(Error::invalid("a Fredholm network needs at least one hidden layer"));
        }
        self.layers = layers;
        Ok(self)
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    /// Number of KM iterations on the grid, `M − 1`.
    pub fn grid_iterations(&self) -> usize {
        self.layers - 1
    }

    pub fn schedule(&self) -> &KmSchedule {
        &self.schedule
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    /// The shared hidden weight `κA + (1−κ)I` (constant schedules only).
    pub fn hidden_weight(&self) -> Option<&DenseMatrix> {
        match &self.weights {
            HiddenWeights::Shared(w) => Some(w),
            HiddenWeights::PerLayer(_) => None,
        }
    }

    /// Bias of hidden layer `m` (1-based): `κ_m g`.
    pub fn hidden_bias(&self, m: usize) -> Vec<f64> {
        let k = self.schedule.kappa(m);
        self.g.iter().map(|v| k * v).collect()
    }

    pub fn source_vector(&self) -> &[f64] {
        &self.g
    }

    pub fn forward(&self) -> Result<SolutionField, Error> {
        self.run(&self.g, false)
    }

    pub fn forward_with_history(&self) -> Result<SolutionField, Error> {
        self.run(&self.g, true)
    }

    /// Forward pass with a different source vector on the same grid, reusing
    /// the hidden weights.
    pub fn forward_with_source(&self, g: &[f64], keep_history: bool) -> Result<SolutionField, Error> {
        if g.len() != self.g.len() {
            return Err(Error::invalid("source vector has the wrong length"));
        }
        self.run(g, keep_history)
    }

    fn run(&self, g: &[f64], keep_history: bool) -> Result<SolutionField, Error> {
        let n = g.len();
        let k1 = self.schedule.kappa(1);
        let mut h: Vec<f64> = match self.seed {
            Seed::Scaled => g.iter().map(|v| k1 * v).collect(),
            Seed::Source => g.to_vec(),
        };
        let mut history = keep_history.then(|| vec![h.clone()]);
        let mut next = vec![0.0; n];
        for m in 2..=self.layers {
            let k = self.schedule.kappa(m);
            match &self.weights {
                HiddenWeights::Shared(w) => {
                    w.matvec_into(&h, &mut next, self.exec);
                    for (y, gv) in next.iter_mut().zip(g) {
                        *y += k * gv;
                    }
                }
                HiddenWeights::PerLayer(a) => {
                    a.matvec_into(&h, &mut next, self.exec);
                    for ((y, gv), hv) in next.iter_mut().zip(g).zip(&h) {
                        *y = k * (gv + *y) + (1.0 - k) * hv;
                    }
                }
            }
            if next.iter().any(|v| !v.is_finite() || v.abs() > BLOWUP) {
                return Err(Error::Diverged { layer: m });
            }
            std::mem::swap(&mut h, &mut next);
            if let Some(hist) = history.as_mut() {
                hist.push(h.clone());
            }
        }
        Ok(SolutionField {
            grid: self.grid.clone(),
            values: h,
            history,
        })
    }

    /// Output layer at `points`: `W_O[k][j] = K(x_k, z_j)Δz`, bias `g(x_k)`.
    pub fn query_layer(&self, points: &[f64]) -> Result<QueryLayer, Error> {
        let z = self.grid.nodes();
        let dz = self.grid.spacing();
        let periodic = self.grid.topology() == Topology::Periodic;
        let mut w = DenseMatrix::zeros(points.len(), z.len());
        let mut bias = Vec::with_capacity(points.len());
        for (k, &x) in points.iter().enumerate() {
            if !x.is_finite() || (!periodic && !self.grid.contains(x)) {
                return Err(Error::invalid(format!(
                    "query point {x} lies outside [{}, {}]",
                    self.grid.a(),
                    self.grid.b()
                )));
            }
            for (j, &zj) in z.iter().enumerate() {
                let v = self.kernel.eval(x, zj).map_err(|e| {
                    Error::from(e).context(format!("kernel at query {x}, node {zj}"))
                })?;
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        what: "kernel".into(),
                        location: format!("query {x}, node {zj}"),
                    });
                }
                w[(k, j)] = v * dz;
            }
            let gx = self
                .source
                .eval(x)
                .map_err(|e| Error::from(e).context(format!("source at query {x}")))?;
            bias.push(gx);
        }
        Ok(QueryLayer {
            points: points.to_vec(),
            weights: w,
            bias,
            exec: self.exec,
        })
    }

    /// `f(x_k) = g(x_k) + Σ_j K(x_k, z_j) Δz h_j`.
    pub fn query(&self, field: &SolutionField, points: &[f64]) -> Result<Vec<f64>, Error> {
        Ok(self.query_layer(points)?.apply(&field.values))
    }
}

/// The assembled output layer for a fixed set of query points.
#[derive(Debug, Clone)]
pub struct QueryLayer {
    pub points: Vec<f64>,
    weights: DenseMatrix,
    bias: Vec<f64>,
    exec: Execution,
}

impl QueryLayer {
    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        let mut out = self.weights.matvec(values, self.exec);
        for (o, b) in out.iter_mut().zip(&self.bias) {
            *o += b;
        }
        out
    }
}

/// Direct solution of `(I − A) f = g` with its condition estimate.
#[derive(Debug, Clone)]
pub struct DenseSolution {
    pub field: SolutionField,
    pub condition: f64,
}

/// Condition numbers beyond this make the direct solve meaningless.
pub const MAX_CONDITION: f64 = 1e14;

pub fn dense_solve(op: &DiscreteOperator) -> Result<DenseSolution, Error> {
    let mut m = op.matrix().clone();
    m.scale(-1.0);
    m.add_to_diagonal(1.0);
    let lu = Lu::factor(&m)?;
    let condition = lu.condition_estimate();
    if !(condition < MAX_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    Ok(DenseSolution {
        field: SolutionField {
            grid: op.grid().clone(),
            values: lu.solve(op.source_vector()),
            history: None,
        },
        condition,
    })
}

/// Inputs of the a priori error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBudget {
    pub q: f64,
    pub d: f64,
    pub a: f64,
    pub b: f64,
    pub n: usize,
    pub residual: f64,
}

impl ErrorBudget {
    pub fn from_operator(op: &DiscreteOperator) -> Result<Self, Error> {
        Ok(Self {
            q: estimate_contraction(op),
            d: estimate_slope_bound(op)?,
            a: op.grid().a(),
            b: op.grid().b(),
            n: op.len(),
            residual: residual_norm(op),
        })
    }

    /// `D(b−a)²/(2N)`.
    pub fn quadrature_term(&self) -> f64 {
        let w = self.b - self.a;
        self.d * w * w / (2.0 * self.n as f64)
    }

    /// `D(b−a)²/(2N) + ‖𝒯g − g‖`.
    pub fn constant(&self) -> f64 {
        self.quadrature_term() + self.residual
    }

    fn check(&self) -> Result<(), Error> {
        let fields = [self.q, self.d, self.a, self.b, self.residual];
        if fields.iter().any(|v| !v.is_finite()) || self.q < 0.0 || self.d < 0.0 || self.residual < 0.0 {
            return Err(Error::invalid("error budget entries must be finite and non-negative"));
        }
        if self.q >= 1.0 {
            return Err(Error::invalid(format!(
                "contraction estimate q = {} ≥ 1: the a priori bound does not apply",
                self.q
            )));
        }
        Ok(())
    }
}

/// `(q^M/(1−q))·(D(b−a)²/(2N) + ‖𝒯g − g‖)`.
pub fn error_bound(budget: &ErrorBudget, layers: usize) -> Result<f64, Error> {
    budget.check()?;
    let q = budget.q;
    Ok(q.powi(layers as i32) / (1.0 - q) * budget.constant())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerPlan {
    pub layers: usize,
    /// True when the target is already met with no layers at all.
    pub saturated: bool,
}

/// Smallest `M` with `error_bound(M) ≤ ε`.
pub fn plan_layers(budget: &ErrorBudget, eps: f64) -> Result<LayerPlan, Error> {
    budget.check()?;
    if !(eps > 0.0) {
        return Err(Error::invalid("target error must be positive"));
    }
    let c = budget.constant();
    let q = budget.q;
    if eps >= error_bound(budget, 0)? {
        return Ok(LayerPlan {
            layers: 0,
            saturated: true,
        });
    }
    if q == 0.0 {
        return Ok(LayerPlan {
            layers: 1,
            saturated: false,
        });
    }
    let x = ((eps * (1.0 - q)).ln() - c.ln()) / q.ln();
    let mut layers = (x - 1e-9).ceil().max(0.0) as usize;
    while error_bound(budget, layers)? > eps * (1.0 + 1e-12) {
        layers += 1;
    }
    Ok(LayerPlan {
        layers,
        saturated: false,
    })
}

/// `(e^{1−q}/(1−q))·‖𝒯g − g‖·e^{−(1−q)v_M}` with `v_M = Σ_{m=1}^{M} κ_m`.
pub fn km_error_estimate(
    budget: &ErrorBudget,
    schedule: &KmSchedule,
    layers: usize,
) -> Result<f64, Error> {
    budget.check()?;
    schedule.validate()?;
    let s = 1.0 - budget.q;
    let v = schedule.partial_sum(layers);
    Ok(s.exp() / s * budget.residual * (-s * v).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub layers: usize,
    /// Max error against the reference, or `‖h_M − h_{M−1}‖_∞` without one.
    pub metric: f64,
}

/// Error (or last-step change) as a function of the number of hidden layers,
/// for `M = 1..=max_layers`. With `exact`, the network is evaluated through
/// the query layer at `points`.
pub fn layer_sweep(
    op: &DiscreteOperator,
    schedule: &KmSchedule,
    max_layers: usize,
    points: &[f64],
    exact: Option<&Fn1>,
) -> Result<Vec<SweepRow>, Error> {
    let net = FredholmNet::build(op.clone(), max_layers, schedule.clone())?;
    let field = net.forward_with_history()?;
    let history = field.history.expect("history requested");
    let reference = match exact {
        Some(f) => Some(
            points
                .iter()
                .map(|&x| f.eval(x))
                .collect::<Result<Vec<_>, _>>()?,
        ),
        None => None,
    };
    let layer = match reference {
        Some(_) => Some(net.query_layer(points)?),
        None => None,
    };
    let mut rows = Vec::with_capacity(max_layers);
    for (m, h) in history.iter().enumerate() {
        let metric = match (&layer, &reference) {
            (Some(l), Some(r)) => max_abs_diff(&l.apply(h), r),
            _ if m == 0 => norm_inf(h),
            _ => max_abs_diff(h, &history[m - 1]),
        };
        rows.push(SweepRow {
            layers: m + 1,
            metric,
        });
    }
    Ok(rows)
}
