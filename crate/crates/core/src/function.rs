//! Shared, thread-safe real functions of one and two variables.
//!
//! Problems are described either by parsed expressions or by native closures;
//! both end up behind these handles.

use std::fmt;
use std::sync::Arc;

use crate::exprlang::{self, EvalError, Expr};

type Inner1 = dyn Fn(f64) -> Result<f64, EvalError> + Send + Sync;
type Inner2 = dyn Fn(f64, f64) -> Result<f64, EvalError> + Send + Sync;

/// A real function of one variable.
#[derive(Clone)]
pub struct Fn1 {
    f: Arc<Inner1>,
    label: Arc<str>,
}

/// A real function of two variables, e.g. a kernel `K(x, z)`.
#[derive(Clone)]
pub struct Fn2 {
    f: Arc<Inner2>,
    label: Arc<str>,
}

impl Fn1 {
    pub fn native(label: &str, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::fallible(label, move |x| Ok(f(x)))
    }

    pub fn fallible(
        label: &str,
        f: impl Fn(f64) -> Result<f64, EvalError> + Send + Sync + 'static,
    ) -> Self {
        Self {
            f: Arc::new(f),
            label: label.into(),
        }
    }

    /// Wraps `expr` as a function of `var`.
    pub fn from_expr(expr: &Expr, var: &str) -> Result<Self, EvalError> {
        let compiled = expr.compile(&[var])?;
        Ok(Self::fallible(&expr.to_string(), move |x| compiled.eval(&[x])))
    }

    pub fn parse(source: &str, var: &str) -> Result<Self, crate::Error> {
        Ok(Self::from_expr(&exprlang::parse(source)?, var)?)
    }

    pub fn constant(c: f64) -> Self {
        Self::native(&c.to_string(), move |_| c)
    }

    pub fn eval(&self, x: f64) -> Result<f64, EvalError> {
        (self.f)(x)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl Fn2 {
    pub fn native(label: &str, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::fallible(label, move |x, z| Ok(f(x, z)))
    }

    pub fn fallible(
        label: &str,
        f: impl Fn(f64, f64) -> Result<f64, EvalError> + Send + Sync + 'static,
    ) -> Self {
        Self {
            f: Arc::new(f),
            label: label.into(),
        }
    }

    /// Wraps `expr` as a function of `(first, second)`.
    pub fn from_expr(expr: &Expr, first: &str, second: &str) -> Result<Self, EvalError> {
        let compiled = expr.compile(&[first, second])?;
        Ok(Self::fallible(&expr.to_string(), move |x, z| {
            compiled.eval(&[x, z])
        }))
    }

    pub fn parse(source: &str, first: &str, second: &str) -> Result<Self, crate::Error> {
        Ok(Self::from_expr(&exprlang::parse(source)?, first, second)?)
    }

    pub fn constant(c: f64) -> Self {
        Self::native(&c.to_string(), move |_, _| c)
    }

    pub fn eval(&self, x: f64, z: f64) -> Result<f64, EvalError> {
        (self.f)(x, z)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for Fn1 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fn1({})", self.label)
    }
}

impl fmt::Debug for Fn2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fn2({})", self.label)
    }
}
