//! Dirichlet problem for the Laplace equation on the unit disc through the
//! double-layer boundary integral equation.
//!
//! On the circle the double-layer kernel is the constant `1/(4π)`, so the
//! density satisfies `μ(φ) = 2f(φ) − (1/2π)∫μ dθ`. The potential is evaluated
//! in the smoothed form
//! `u(x) = Σ_j (μ_j − μ*)(k(x,θ_j) − 1/(4π))Δθ + ½μ* + P*`, where `μ*` is the
//! density at the radial projection of `x` and `P* = (Δθ/4π)Σ_j μ_j`.

use std::f64::consts::{PI, TAU};

use crate::grid::Grid1D;
use crate::net::FredholmNet;
use crate::operator::{discretize, DiscreteOperator, FieProblem, KmSchedule};
use crate::{Error, Fn1, Fn2};

/// κ minimizing the spectral radius of the KM map for this kernel: zero-mean
/// modes contract by `1−κ`, the mean by `|1−2κ|`.
pub const DEFAULT_KAPPA: f64 = 2.0 / 3.0;

const INV_4PI: f64 = 0.25 / PI;

/// `(1/2π)(1 − r cos(θ−φ)) / (1 − 2r cos(θ−φ) + r²)`.
pub fn polar_double_layer_kernel(r: f64, phi: f64, theta: f64) -> Result<f64, Error> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::invalid(format!("radius {r} is outside [0, 1]")));
    }
    let c = (theta - phi).cos();
    let den = 1.0 - 2.0 * r * c + r * r;
    if den == 0.0 {
        return Err(Error::invalid(
            "kernel is 0/0 on the boundary at θ = φ; use the limit 1/(4π)",
        ));
    }
    Ok((1.0 - r * c) / den / TAU)
}

#[derive(Debug, Clone)]
pub struct DiscBoundaryProblem {
    /// Dirichlet data `f(φ)`.
    pub boundary: Fn1,
    pub theta_n: usize,
    pub schedule: KmSchedule,
    pub layers: usize,
}

impl DiscBoundaryProblem {
    pub fn new(boundary: Fn1, theta_n: usize, layers: usize) -> Self {
        Self {
            boundary,
            theta_n,
            schedule: KmSchedule::Constant(DEFAULT_KAPPA),
            layers,
        }
    }

    pub fn with_schedule(mut self, schedule: KmSchedule) -> Self {
        self.schedule = schedule;
        self
    }
}

/// Constant matrix `A_ij = −Δθ/(2π)` and source `2f(θ_i)`.
pub fn build_bie(problem: &DiscBoundaryProblem) -> Result<DiscreteOperator, Error> {
    let grid = Grid1D::periodic_angle(problem.theta_n)?;
    let f = problem.boundary.clone();
    let fie = FieProblem::linear(
        Fn2::constant(-1.0 / TAU),
        Fn1::fallible(&format!("2*({})", f.label()), move |phi| Ok(2.0 * f.eval(phi)?)),
        0.0,
        TAU,
    );
    discretize(&fie, &grid)
}

#[derive(Debug, Clone)]
pub struct BoundaryDensity {
    pub grid: Grid1D,
    pub values: Vec<f64>,
    boundary: Option<Fn1>,
}

impl BoundaryDensity {
    /// A density given directly on a periodic grid. Without boundary data
    /// only linear interpolation is available off the grid.
    pub fn from_values(grid: Grid1D, values: Vec<f64>, boundary: Option<Fn1>) -> Result<Self, Error> {
        if values.len() != grid.len() {
            return Err(Error::invalid("density length does not match the θ-grid"));
        }
        if grid.topology() != crate::Topology::Periodic {
            return Err(Error::invalid("boundary densities live on a periodic grid"));
        }
        Ok(Self {
            grid,
            values,
            boundary,
        })
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// `P* = (Δθ/4π) Σ_j μ_j`.
    pub fn boundary_mean_potential(&self) -> f64 {
        self.grid.spacing() * INV_4PI * self.values.iter().sum::<f64>()
    }

    /// Density at angle `phi` by the chosen rule.
    pub fn at(&self, phi: f64, interp: DensityInterpolation) -> Result<f64, Error> {
        match interp {
            DensityInterpolation::Linear => Ok(self.grid.interpolate(&self.values, phi)?),
            DensityInterpolation::Nystrom => {
                let f = self.boundary.as_ref().ok_or_else(|| {
                    Error::invalid("Nyström interpolation needs the boundary data")
                })?;
                // output layer of the BIE network: 2f(φ) + Σ_j (−Δθ/2π) μ_j
                Ok(2.0 * f.eval(phi)? - self.mean())
            }
        }
    }
}

/// How the density is evaluated between grid nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DensityInterpolation {
    /// The network's output layer at `φ*` (exact for the discrete equation).
    #[default]
    Nystrom,
    /// Piecewise-linear interpolation on the periodic θ-grid.
    Linear,
}

/// Density on the θ-grid from the forward pass of the BIE network.
pub fn solve_density(problem: &DiscBoundaryProblem) -> Result<BoundaryDensity, Error> {
    let op = build_bie(problem)?;
    let grid = op.grid().clone();
    let net = FredholmNet::build(op, problem.layers, problem.schedule.clone())?;
    let field = net.forward()?;
    BoundaryDensity::from_values(grid, field.values, Some(problem.boundary.clone()))
}

/// Radial projection of the Cartesian point `(x, y)` onto the circle and the
/// linearly interpolated density there. The origin maps to `φ* = 0`.
pub fn boundary_project(density: &BoundaryDensity, x: f64, y: f64) -> Result<(f64, f64), Error> {
    let phi = if x == 0.0 && y == 0.0 {
        0.0
    } else {
        y.atan2(x).rem_euclid(TAU)
    };
    Ok((phi, density.at(phi, DensityInterpolation::Linear)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    /// Query points `(r, φ)`.
    pub points: Vec<(f64, f64)>,
    pub values: Vec<f64>,
    pub phi_star: Vec<f64>,
    pub mu_star: Vec<f64>,
}

/// Smoothed double-layer potential at polar points `(r, φ)`, `0 ≤ r ≤ 1`.
pub fn evaluate_potential(
    density: &BoundaryDensity,
    points: &[(f64, f64)],
    interp: DensityInterpolation,
) -> Result<PotentialField, Error> {
    let theta = density.grid.nodes();
    let dtheta = density.grid.spacing();
    let p_star = density.boundary_mean_potential();
    let mut out = PotentialField {
        points: points.to_vec(),
        values: Vec::with_capacity(points.len()),
        phi_star: Vec::with_capacity(points.len()),
        mu_star: Vec::with_capacity(points.len()),
    };
    for &(r, phi) in points {
        if !(0.0..=1.0).contains(&r) || !phi.is_finite() {
            return Err(Error::invalid(format!(
                "query (r = {r}, φ = {phi}) is outside the closed unit disc"
            )));
        }
        let phi_star = if r == 0.0 { 0.0 } else { phi.rem_euclid(TAU) };
        let mu_star = density.at(phi_star, interp)?;
        let mut u = 0.5 * mu_star + p_star;
        if r < 1.0 {
            let mut s = 0.0;
            for (&t, &mu) in theta.iter().zip(&density.values) {
                s += (mu - mu_star) * (polar_double_layer_kernel(r, phi, t)? - INV_4PI);
            }
            u += s * dtheta;
        }
        out.values.push(u);
        out.phi_star.push(phi_star);
        out.mu_star.push(mu_star);
    }
    Ok(out)
}

/// Polar lattice `r_i = i/(n_r−1)`, `φ_k = φ_0 + k·span/n_phi`.
pub fn polar_lattice(n_r: usize, n_phi: usize, phi0: f64, span: f64) -> Vec<(f64, f64)> {
    let mut pts = Vec::with_capacity(n_r * n_phi);
    for i in 0..n_r {
        let r = if n_r == 1 { 1.0 } else { i as f64 / (n_r - 1) as f64 };
        for k in 0..n_phi {
            pts.push((r, phi0 + span * k as f64 / n_phi as f64));
        }
    }
    pts
}
