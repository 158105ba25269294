//! Two-point boundary value problems `y″ + g(x) y = h(x)`, `y(0) = α`,
//! `y(1) = β`, solved through the integral equation for `u = y″`:
//!
//! `u(x) = f(x) + ∫_0^1 K(x,t) u(t) dt`, with the Green's-function kernel
//! `K(x,t) = t(1−x)g(x)` for `t ≤ x`, `x(1−t)g(x)` for `t ≥ x`, and
//! `f = h − αg − (β−α)xg`. The solution is recovered as `y = (h − u)/g`.

use crate::grid::Grid1D;
use crate::net::{FredholmNet, SolutionField};
use crate::operator::{discretize, estimate_contraction, FieProblem, KmSchedule};
use crate::{Error, Fn1, Fn2};

/// `g(x)` values below `TOL_G · max|g|` are treated as zeros of `g`.
pub const TOL_G: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct BvpSpec {
    pub g: Fn1,
    pub h: Fn1,
    pub alpha: f64,
    pub beta: f64,
}

pub fn bvp_to_fie(spec: &BvpSpec) -> FieProblem {
    let g = spec.g.clone();
    let kernel = Fn2::fallible(&format!("green[{}]", spec.g.label()), move |x, t| {
        let gx = g.eval(x)?;
        Ok(if t <= x {
            t * (1.0 - x) * gx
        } else {
            x * (1.0 - t) * gx
        })
    });
    let (g, h, alpha, beta) = (spec.g.clone(), spec.h.clone(), spec.alpha, spec.beta);
    let source = Fn1::fallible(
        &format!("{} - {alpha}*g - {}*x*g", spec.h.label(), beta - alpha),
        move |x| {
            let gx = g.eval(x)?;
            Ok(h.eval(x)? - alpha * gx - (beta - alpha) * x * gx)
        },
    );
    FieProblem::linear(kernel, source, 0.0, 1.0)
}

/// Recovers `y` at `points` (ascending) from `u = y″` at the same points.
/// `g_scale` is `max|g|` on the solution grid. Endpoints return the boundary
/// values; interior zeros of `g` are bridged by linear interpolation between
/// the neighbouring recoverable points.
pub fn recover_solution(
    spec: &BvpSpec,
    points: &[f64],
    u: &[f64],
    g_scale: f64,
) -> Result<Vec<f64>, Error> {
    if points.len() != u.len() {
        return Err(Error::invalid("need one u value per query point"));
    }
    let tol = TOL_G * g_scale;
    let mut y: Vec<Option<f64>> = Vec::with_capacity(points.len());
    for (&x, &ux) in points.iter().zip(u) {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::invalid(format!("query point {x} lies outside [0, 1]")));
        }
        let v = if x == 0.0 {
            Some(spec.alpha)
        } else if x == 1.0 {
            Some(spec.beta)
        } else {
            let gx = spec.g.eval(x)?;
            (gx.abs() >= tol).then(|| spec.h.eval(x).map(|hx| (hx - ux) / gx)).transpose()?
        };
        y.push(v);
    }
    let mut out = Vec::with_capacity(y.len());
    let mut i = 0;
    while i < y.len() {
        if let Some(v) = y[i] {
            out.push(v);
            i += 1;
            continue;
        }
        let start = i;
        while i < y.len() && y[i].is_none() {
            i += 1;
        }
        let run = i - start;
        if run >= 3 {
            return Err(Error::invalid(format!(
                "g vanishes on {run} adjacent query points starting at x = {}; cannot recover y",
                points[start]
            )));
        }
        let (Some(left), Some(right)) = (start.checked_sub(1), (i < y.len()).then_some(i)) else {
            return Err(Error::invalid(format!(
                "g vanishes at x = {} with no recoverable neighbour on one side",
                points[start]
            )));
        };
        let (xl, yl, xr, yr) = (points[left], out[left], points[right], y[right].unwrap());
        if !(xr > xl) {
            return Err(Error::invalid("query points must be ascending to bridge zeros of g"));
        }
        for &x in &points[start..i] {
            out.push(yl + (yr - yl) * (x - xl) / (xr - xl));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct BvpSolution {
    /// `u = y″` on the grid.
    pub field: SolutionField,
    pub points: Vec<f64>,
    /// `u` at the query points (output layer).
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    pub q_est: f64,
    pub warnings: Vec<String>,
}

pub fn solve_bvp(
    spec: &BvpSpec,
    grid: &Grid1D,
    layers: usize,
    schedule: KmSchedule,
    points: &[f64],
) -> Result<BvpSolution, Error> {
    if grid.a() != 0.0 || grid.b() != 1.0 {
        return Err(Error::invalid("boundary value problems are posed on [0, 1]"));
    }
    let problem = bvp_to_fie(spec);
    let op = discretize(&problem, grid)?;
    let q_est = estimate_contraction(&op);
    let mut warnings = Vec::new();
    if q_est >= 1.0 {
        warnings.push(format!(
            "contraction estimate q = {q_est:.4} ≥ 1: convergence of the layer iteration is not guaranteed"
        ));
    }
    let mut g_scale: f64 = 0.0;
    for &z in grid.nodes() {
        g_scale = g_scale.max(spec.g.eval(z)?.abs());
    }
    let net = FredholmNet::build(op, layers, schedule)?;
    let field = net.forward()?;
    let u = net.query(&field, points)?;
    let y = recover_solution(spec, points, &u, g_scale)?;
    Ok(BvpSolution {
        field,
        points: points.to_vec(),
        u,
        y,
        q_est,
        warnings,
    })
}

/// Solution of `y″ + x y = 0`, `y(0) = 0`, `y(1) = 2`, from the power series
/// `a_{n+2} = −a_{n−1}/((n+2)(n+1))` of the odd-start solution.
pub fn airy_bvp_exact(x: f64) -> f64 {
    2.0 * airy_series(x) / airy_series(1.0)
}

fn airy_series(x: f64) -> f64 {
    // coefficients a_0 = 0, a_1 = 1, a_2 = 0
    let mut a = [0.0f64, 1.0, 0.0];
    let mut sum = x;
    let mut xn = x * x; // x^2, matches a[2]
    // every third coefficient vanishes, so run a fixed number of terms;
    // |a_n| < 1e-40 well before n = 90
    for n in 1..90usize {
        let next = -a[(n - 1) % 3] / (((n + 2) * (n + 1)) as f64);
        a[(n + 2) % 3] = next;
        xn *= x;
        let term = next * xn;
        sum += term;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Scheme, Topology};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const P: f64 = 3.2;

    fn ode1() -> BvpSpec {
        BvpSpec {
            g: Fn1::native("3p/(p+x^2)^2", |x| 3.0 * P / (P + x * x).powi(2)),
            h: Fn1::constant(0.0),
            alpha: 0.0,
            beta: 1.0 / (P + 1.0).sqrt(),
        }
    }

    fn ode2() -> BvpSpec {
        BvpSpec {
            g: Fn1::native("x", |x| x),
            h: Fn1::constant(0.0),
            alpha: 0.0,
            beta: 2.0,
        }
    }

    fn closed(n: usize) -> Grid1D {
        Grid1D::uniform(0.0, 1.0, n, Scheme::Closed, Topology::Interval).unwrap()
    }

    #[test]
    fn source_examples() {
        let p = bvp_to_fie(&ode2());
        for x in [0.0, 0.3, 1.0] {
            assert_abs_diff_eq!(p.source.eval(x).unwrap(), -2.0 * x * x, epsilon = 1e-15);
        }
        let p = bvp_to_fie(&ode1());
        assert_eq!(p.source.eval(0.0).unwrap(), 0.0);
        let x = 0.4;
        let want = -(1.0 / 4.2f64.sqrt()) * x * 3.0 * P / (P + x * x).powi(2);
        assert_abs_diff_eq!(p.source.eval(x).unwrap(), want, epsilon = 1e-15);

        let zero = BvpSpec {
            g: Fn1::constant(0.0),
            h: Fn1::native("x^3", |x| x * x * x),
            alpha: 1.0,
            beta: 2.0,
        };
        let p = bvp_to_fie(&zero);
        assert_eq!(p.kernel.eval(0.3, 0.7).unwrap(), 0.0);
        assert_eq!(p.source.eval(0.5).unwrap(), 0.125);
    }

    #[test]
    fn recovery_examples() {
        let spec = ode1();
        let y = recover_solution(&spec, &[0.0, 1.0], &[0.0, 0.0], 0.9375).unwrap();
        assert_eq!(y, vec![0.0, 1.0 / 4.2f64.sqrt()]);
        assert_abs_diff_eq!(y[1], 0.48795, epsilon = 1e-5);

        let y = recover_solution(&ode2(), &[0.0], &[0.0], 1.0).unwrap();
        assert_eq!(y, vec![0.0]);
    }

    #[test]
    fn recovery_bridges_isolated_zero() {
        // g = x − 0.5 vanishes at the middle query
        let spec = BvpSpec {
            g: Fn1::native("x-0.5", |x| x - 0.5),
            h: Fn1::constant(0.0),
            alpha: 0.0,
            beta: 1.0,
        };
        let xs = [0.25, 0.5, 0.75];
        let u = [0.25, 0.0, -0.75];
        let y = recover_solution(&spec, &xs, &u, 0.5).unwrap();
        assert_abs_diff_eq!(y[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(y[2], 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(y[1], 2.0, epsilon = 1e-15);

        let zero_g = BvpSpec {
            g: Fn1::constant(0.0),
            ..spec
        };
        let err = recover_solution(&zero_g, &[0.2, 0.3, 0.4], &[0.0; 3], 1.0).unwrap_err();
        assert!(err.to_string().contains("3 adjacent"), "{err}");
    }

    #[test]
    fn airy_series_satisfies_the_ode() {
        assert_eq!(airy_bvp_exact(0.0), 0.0);
        assert_abs_diff_eq!(airy_bvp_exact(1.0), 2.0, epsilon = 1e-15);
        let h = 1e-4;
        for x in [0.2, 0.5, 0.8] {
            let d2 = (airy_bvp_exact(x + h) - 2.0 * airy_bvp_exact(x) + airy_bvp_exact(x - h)) / (h * h);
            assert_abs_diff_eq!(d2 + x * airy_bvp_exact(x), 0.0, epsilon = 1e-5);
        }
    }

    #[test]
    fn ode1_solution() {
        let xs: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
        let sol = solve_bvp(&ode1(), &closed(2000), 10, KmSchedule::Constant(1.0), &xs).unwrap();
        assert!(sol.q_est < 1.0 && sol.warnings.is_empty());
        assert_eq!(sol.y[0], 0.0);
        assert_eq!(sol.y[100], 1.0 / 4.2f64.sqrt());
        let err = sol
            .y
            .iter()
            .zip(&xs)
            .fold(0.0f64, |m, (y, x)| m.max((y - x / (P + x * x).sqrt()).abs()));
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn ode2_solution() {
        let xs: Vec<f64> = (0..=50).map(|k| k as f64 / 50.0).collect();
        let sol = solve_bvp(&ode2(), &closed(1000), 15, KmSchedule::Constant(1.0), &xs).unwrap();
        let err = sol
            .y
            .iter()
            .zip(&xs)
            .fold(0.0f64, |m, (y, x)| m.max((y - airy_bvp_exact(*x)).abs()));
        assert!(err < 1e-6, "{err}");
    }

    proptest! {
        #[test]
        fn kernel_is_continuous_on_the_diagonal(x in 0.0f64..1.0, c in -3.0f64..3.0) {
            let spec = BvpSpec { g: Fn1::native("c+x", move |x| c + x), h: Fn1::constant(0.0), alpha: 0.0, beta: 0.0 };
            let k = bvp_to_fie(&spec).kernel;
            let below = k.eval(x, x).unwrap();
            let t = x * (1.0 - x) * (c + x);
            prop_assert!((below - t).abs() <= 1e-15);
            let eps = 1e-9;
            if x + eps <= 1.0 {
                prop_assert!((k.eval(x, x + eps).unwrap() - below).abs() <= 1e-8);
            }
        }
    }
}
