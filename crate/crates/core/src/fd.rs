//! Finite-difference reference solver for the Laplace equation on the unit
//! disc in polar coordinates.
//!
//! Interior nodes `r_i = iΔr` (`i = 1..N_r−1`), `θ_j = jΔθ` use the 5-point
//! stencil for `u_rr + u_r/r + u_θθ/r² = 0`; the ring `r = 1` carries the
//! Dirichlet data and the centre value is the mean of the first ring.
//!
//! The default solver is iterative refinement preconditioned by an exact
//! solve of the same stencil: a DFT in `θ` decouples the angular modes and
//! each mode is a tridiagonal system in `r`. SOR is available as an
//! independent route.

use std::f64::consts::TAU;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::{Error, Fn1};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FdMethod {
    /// DFT-in-θ direct solve used as a preconditioner for iterative refinement.
    Spectral,
    /// Successive over-relaxation, lexicographic sweeps.
    Sor { omega: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub method: FdMethod,
}

impl Default for FdOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: 50,
            method: FdMethod::Spectral,
        }
    }
}

/// Solved polar grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarGrid {
    pub nr: usize,
    pub ntheta: usize,
    pub dr: f64,
    pub dtheta: f64,
    pub center: f64,
    /// Interior rings `i = 1..nr−1`, row-major by ring.
    pub interior: Vec<f64>,
    /// Dirichlet data on `r = 1`.
    pub boundary: Vec<f64>,
    pub iterations: usize,
    /// Final residual relative to the boundary forcing.
    pub residual: f64,
}

impl PolarGrid {
    pub fn radius(&self, i: usize) -> f64 {
        i as f64 * self.dr
    }

    pub fn angle(&self, j: usize) -> f64 {
        j as f64 * self.dtheta
    }

    /// Value at ring `i ∈ 0..=nr`, angle index `j`; ring 0 is the centre.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        match i {
            0 => self.center,
            i if i == self.nr => self.boundary[j],
            i => self.interior[(i - 1) * self.ntheta + j],
        }
    }

    /// Every node as `((r, θ), u)`: the centre once, then rings `1..=nr`.
    pub fn samples(&self) -> SampledField {
        let mut points = vec![(0.0, 0.0)];
        let mut values = vec![self.center];
        for i in 1..=self.nr {
            for j in 0..self.ntheta {
                points.push((self.radius(i), self.angle(j)));
                values.push(self.value(i, j));
            }
        }
        SampledField { points, values }
    }
}

struct Stencil {
    nr: usize,
    nt: usize,
    dr: f64,
    dt: f64,
    /// coefficient of `u_{i−1}` for ring `i` (index `i`, entry 0 unused)
    a: Vec<f64>,
    /// coefficient of `u_{i+1}`
    c: Vec<f64>,
    /// `1/(r_i² Δθ²)`
    t: Vec<f64>,
}

impl Stencil {
    fn new(nr: usize, nt: usize) -> Self {
        let dr = 1.0 / nr as f64;
        let dt = TAU / nt as f64;
        let mut a = vec![0.0; nr];
        let mut c = vec![0.0; nr];
        let mut t = vec![0.0; nr];
        for i in 1..nr {
            let r = i as f64 * dr;
            a[i] = 1.0 / (dr * dr) - 1.0 / (2.0 * r * dr);
            c[i] = 1.0 / (dr * dr) + 1.0 / (2.0 * r * dr);
            t[i] = 1.0 / (r * r * dt * dt);
        }
        Self {
            nr,
            nt,
            dr,
            dt,
            a,
            c,
            t,
        }
    }

    fn diag(&self) -> f64 {
        -2.0 / (self.dr * self.dr)
    }

    /// Residual `b − L u` of the full system (centre row first).
    fn residual(&self, center: f64, u: &[f64], f: &[f64], r: &mut [f64]) -> f64 {
        let (nr, nt) = (self.nr, self.nt);
        let ring1_mean = u[..nt].iter().sum::<f64>() / nt as f64;
        let rc = ring1_mean - center;
        let d0 = self.diag();
        for i in 1..nr {
            let row = &u[(i - 1) * nt..i * nt];
            for j in 0..nt {
                let inner = if i == 1 { center } else { u[(i - 2) * nt + j] };
                let outer = if i == nr - 1 { f[j] } else { u[i * nt + j] };
                let (jm, jp) = ((j + nt - 1) % nt, (j + 1) % nt);
                let lu = self.a[i] * inner
                    + d0 * row[j]
                    + self.c[i] * outer
                    + self.t[i] * (row[jp] - 2.0 * row[j] + row[jm]);
                r[(i - 1) * nt + j] = -lu;
            }
        }
        rc
    }
}

/// Exact solve of the stencil with zero Dirichlet data, mode by mode.
struct SpectralSolver {
    st: Stencil,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    lambda: Vec<f64>,
}

impl SpectralSolver {
    fn new(st: Stencil) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(st.nt);
        let inv = planner.plan_fft_inverse(st.nt);
        let lambda = (0..st.nt)
            .map(|k| -(2.0 - 2.0 * (k as f64 * st.dt).cos()))
            .collect();
        Self {
            st,
            fwd,
            inv,
            lambda,
        }
    }

    /// Solves `L δ = r` (centre row residual `rc`); returns `δ_c`, writes `δ`.
    fn solve(&self, rc: f64, r: &[f64], delta: &mut [f64]) -> f64 {
        let (nr, nt) = (self.st.nr, self.st.nt);
        let m = nr - 1;
        let mut hat: Vec<Complex<f64>> = r.iter().map(|&v| Complex::new(v, 0.0)).collect();
        for row in hat.chunks_exact_mut(nt) {
            self.fwd.process(row);
        }
        let d0 = self.st.diag();
        let n = nt as f64;
        let mut cp = vec![0.0; m];
        let mut rhs = vec![Complex::new(0.0, 0.0); m];
        for k in 0..nt {
            // Thomas algorithm along rings for mode k
            for i in 0..m {
                let ring = i + 1;
                let mut d = d0 + self.lambda[k] * self.st.t[ring];
                let mut b = hat[i * nt + k];
                if ring == 1 && k == 0 {
                    // δ̂_0 = N δ_c = δ̂_1 + N r_c
                    d += self.st.a[1];
                    b -= self.st.a[1] * n * rc;
                }
                let a = if i == 0 { 0.0 } else { self.st.a[ring] };
                let c = if i == m - 1 { 0.0 } else { self.st.c[ring] };
                let (cprev, rprev) = if i == 0 {
                    (0.0, Complex::new(0.0, 0.0))
                } else {
                    (cp[i - 1], rhs[i - 1])
                };
                let denom = d - a * cprev;
                cp[i] = c / denom;
                rhs[i] = (b - rprev * a) / denom;
            }
            for i in (0..m.saturating_sub(1)).rev() {
                let next = rhs[i + 1];
                rhs[i] -= next * cp[i];
            }
            for i in 0..m {
                hat[i * nt + k] = rhs[i];
            }
        }
        let center = hat[0].re / n + rc;
        for (row, out) in hat.chunks_exact_mut(nt).zip(delta.chunks_exact_mut(nt)) {
            self.inv.process(row);
            for (o, v) in out.iter_mut().zip(row.iter()) {
                *o = v.re / n;
            }
        }
        center
    }
}

fn scale_of(st: &Stencil, f: &[f64]) -> f64 {
    let s = st.c[st.nr - 1] * f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

pub fn solve_fd(
    boundary: &Fn1,
    nr: usize,
    ntheta: usize,
    options: FdOptions,
) -> Result<PolarGrid, Error> {
    if nr < 8 || ntheta < 8 {
        return Err(Error::invalid("polar grid needs at least 8 cells in each direction"));
    }
    if !(options.tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let st = Stencil::new(nr, ntheta);
    let mut f = Vec::with_capacity(ntheta);
    for j in 0..ntheta {
        let theta = j as f64 * st.dt;
        let v = boundary.eval(theta)?;
        if !v.is_finite() {
            return Err(Error::NonFinite {
                what: "boundary data".into(),
                location: format!("θ = {theta}"),
            });
        }
        f.push(v);
    }
    let scale = scale_of(&st, &f);
    let n_int = (nr - 1) * ntheta;
    let mut u = vec![0.0; n_int];
    let mut center = 0.0;
    let mut r = vec![0.0; n_int];
    let mut iterations = 0;
    let residual_of = |rc: f64, r: &[f64]| {
        r.iter().fold(rc.abs(), |m, v| m.max(v.abs())) / scale
    };

    let (dr, dtheta) = (st.dr, st.dt);
    let mut res = {
        let rc = st.residual(center, &u, &f, &mut r);
        residual_of(rc, &r)
    };
    match options.method {
        FdMethod::Spectral => {
            let solver = SpectralSolver::new(st);
            let mut delta = vec![0.0; n_int];
            while res > options.tol && iterations < options.max_iterations {
                let rc = solver.st.residual(center, &u, &f, &mut r);
                let dc = solver.solve(rc, &r, &mut delta);
                center += dc;
                u.iter_mut().zip(&delta).for_each(|(x, d)| *x += d);
                iterations += 1;
                let rc = solver.st.residual(center, &u, &f, &mut r);
                res = residual_of(rc, &r);
            }
        }
        FdMethod::Sor { omega } => {
            if !(omega > 0.0 && omega < 2.0) {
                return Err(Error::invalid("SOR needs 0 < ω < 2"));
            }
            let nt = ntheta;
            let d0 = st.diag();
            while res > options.tol && iterations < options.max_iterations {
                for i in 1..nr {
                    let diag = d0 - 2.0 * st.t[i];
                    for j in 0..nt {
                        let (jm, jp) = ((j + nt - 1) % nt, (j + 1) % nt);
                        let inner = if i == 1 { center } else { u[(i - 2) * nt + j] };
                        let outer = if i == nr - 1 { f[j] } else { u[i * nt + j] };
                        let row = (i - 1) * nt;
                        let off = st.a[i] * inner
                            + st.c[i] * outer
                            + st.t[i] * (u[row + jp] + u[row + jm]);
                        let gs = -off / diag;
                        u[row + j] += omega * (gs - u[row + j]);
                    }
                }
                center = u[..nt].iter().sum::<f64>() / nt as f64;
                iterations += 1;
                let rc = st.residual(center, &u, &f, &mut r);
                res = residual_of(rc, &r);
            }
        }
    }
    if res > options.tol {
        return Err(Error::NoConvergence {
            iterations,
            residual: res,
        });
    }
    Ok(PolarGrid {
        nr,
        ntheta,
        dr,
        dtheta,
        center,
        interior: u,
        boundary: f,
        iterations,
        residual: res,
    })
}

/// Values at a list of polar points `(r, φ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    pub points: Vec<(f64, f64)>,
    pub values: Vec<f64>,
}

impl SampledField {
    pub fn from_fn(points: Vec<(f64, f64)>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = points.iter().map(|&(r, p)| f(r, p)).collect();
        Self { points, values }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldStats {
    pub max_abs: f64,
    pub mean_abs: f64,
    /// Point where the largest difference occurs.
    pub argmax: (f64, f64),
}

pub fn compare_fields(a: &SampledField, b: &SampledField) -> Result<FieldStats, Error> {
    if a.points != b.points || a.values.len() != a.points.len() || b.values.len() != b.points.len() {
        return Err(Error::invalid("fields are sampled at different points"));
    }
    if a.points.is_empty() {
        return Err(Error::invalid("fields are empty"));
    }
    let mut max_abs = -1.0;
    let mut argmax = a.points[0];
    let mut sum = 0.0;
    for ((x, y), p) in a.values.iter().zip(&b.values).zip(&a.points) {
        let d = (x - y).abs();
        sum += d;
        if d > max_abs {
            max_abs = d;
            argmax = *p;
        }
    }
    Ok(FieldStats {
        max_abs,
        mean_abs: sum / a.points.len() as f64,
        argmax,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn exact(r: f64, p: f64) -> f64 {
        r * r * (2.0 * p).cos() + 1.0
    }

    fn data() -> Fn1 {
        Fn1::native("1+cos(2*phi)", |p| 1.0 + (2.0 * p).cos())
    }

    fn max_err(g: &PolarGrid) -> f64 {
        let s = g.samples();
        let e = SampledField::from_fn(s.points.clone(), exact);
        compare_fields(&s, &e).unwrap().max_abs
    }

    #[test]
    fn constant_data_is_reproduced() {
        let g = solve_fd(&Fn1::constant(1.0), 16, 24, FdOptions::default()).unwrap();
        assert!(g.residual <= 1e-10);
        assert!(g.samples().values.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn second_order_in_theta() {
        let e1 = max_err(&solve_fd(&data(), 32, 32, FdOptions::default()).unwrap());
        let e2 = max_err(&solve_fd(&data(), 64, 64, FdOptions::default()).unwrap());
        let ratio = e1 / e2;
        assert!((3.0..=5.0).contains(&ratio), "{e1} {e2} {ratio}");
    }

    #[test]
    fn maximum_principle_and_mean_value() {
        let g = solve_fd(&data(), 40, 48, FdOptions::default()).unwrap();
        let s = g.samples();
        let lo = g.boundary.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = g.boundary.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(s.values.iter().all(|&v| v >= lo - 1e-10 && v <= hi + 1e-10));
        let mean = g.boundary.iter().sum::<f64>() / g.ntheta as f64;
        assert_abs_diff_eq!(g.center, mean, epsilon = 1e-3);
    }

    #[test]
    fn sor_agrees_with_spectral() {
        let sp = solve_fd(&data(), 12, 16, FdOptions::default()).unwrap();
        let opts = FdOptions {
            tol: 1e-11,
            max_iterations: 20_000,
            method: FdMethod::Sor { omega: 1.6 },
        };
        let sor = solve_fd(&data(), 12, 16, opts).unwrap();
        assert!(sor.iterations > 1);
        let st = compare_fields(&sp.samples(), &sor.samples()).unwrap();
        assert!(st.max_abs < 1e-8, "{st:?}");
    }

    #[test]
    fn non_convergence_is_reported() {
        let opts = FdOptions {
            tol: 1e-12,
            max_iterations: 2,
            method: FdMethod::Sor { omega: 1.0 },
        };
        assert!(matches!(
            solve_fd(&data(), 16, 16, opts),
            Err(Error::NoConvergence { iterations: 2, .. })
        ));
        assert!(solve_fd(&data(), 4, 16, FdOptions::default()).is_err());
    }

    #[test]
    fn compare_examples() {
        let pts = vec![(0.1, 0.2), (0.5, 1.0), (0.9, 3.0)];
        let a = SampledField::from_fn(pts.clone(), exact);
        assert_eq!(compare_fields(&a, &a).unwrap().max_abs, 0.0);
        let b = SampledField::from_fn(pts.clone(), |r, p| exact(r, p) + 0.25);
        let s = compare_fields(&a, &b).unwrap();
        assert_abs_diff_eq!(s.max_abs, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(s.mean_abs, 0.25, epsilon = 1e-15);
        let c = SampledField::from_fn(pts[..2].to_vec(), exact);
        assert!(compare_fields(&a, &c).is_err());
    }
}
