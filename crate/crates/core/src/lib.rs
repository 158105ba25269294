//! Fredholm neural networks: layered fixed-point solvers whose weights are
//! assembled directly from an integral equation's kernel and source.
//!
//! The pieces, bottom up:
//!
//! * [`exprlang`]: text expressions for kernels, sources and boundary data.
//! * [`grid`]: uniform quadrature grids.
//! * [`operator`]: the discretized integral operator and KM steps.
//! * [`net`]: the explicit-weight network, query layer and error budgets.
//! * [`nonlinear`]: outer re-linearization for nonlinear equations.
//! * [`bvp`]: two-point boundary value problems through a Green's-function kernel.
//! * [`laplace`]: the Dirichlet problem on the unit disc via a double-layer BIE.
//! * [`fd`]: a finite-difference polar Laplace solver used as a reference.

// `!(x > y)` is the NaN-rejecting form used throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bvp;
pub mod exprlang;
pub mod fd;
pub mod function;
pub mod grid;
pub mod laplace;
pub mod linalg;
pub mod net;
pub mod nonlinear;
pub mod operator;

use thiserror::Error;

pub use function::{Fn1, Fn2};
pub use grid::{Grid1D, Scheme, Topology};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] exprlang::ParseError),
    #[error(transparent)]
    Eval(#[from] exprlang::EvalError),
    #[error(transparent)]
    Grid(#[from] grid::GridError),
    #[error("{what} is not finite at {location}")]
    NonFinite { what: String, location: String },
    #[error("{0}")]
    Invalid(String),
    #[error("iteration diverged at layer {layer} (non-finite or overflowing values)")]
    Diverged { layer: usize },
    #[error("matrix is singular to working precision (pivot column {column})")]
    Singular { column: usize },
    #[error("system is ill-conditioned (estimated 1-norm condition number {condition:e})")]
    IllConditioned { condition: f64 },
    #[error("{what}: {source}")]
    Context {
        what: String,
        #[source]
        source: Box<Error>,
    },
    #[error("no convergence after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn context(self, what: impl Into<String>) -> Self {
        Error::Context {
            what: what.into(),
            source: Box::new(self),
        }
    }

    /// True for failures that come from the numbers rather than from the input
    /// description (divergence, domain errors, singular systems).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Parse(_) | Error::Grid(_) | Error::Invalid(_) => false,
            Error::Eval(e) => !matches!(e, exprlang::EvalError::UnboundVariable(_)),
            Error::NonFinite { .. }
            | Error::Diverged { .. }
            | Error::Singular { .. }
            | Error::IllConditioned { .. }
            | Error::NoConvergence { .. } => true,
            Error::Context { source, .. } => source.is_numerical(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
