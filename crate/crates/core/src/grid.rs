//! Uniform quadrature grids on an interval or a periodic parameter range.

use thiserror::Error;

/// Node placement rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// `z_j = a + j·Δz`, `Δz = (b−a)/N` (left Riemann sum).
    #[default]
    Left,
    /// `z_j = a + (j+½)·Δz`, `Δz = (b−a)/N`.
    Midpoint,
    /// Endpoint-inclusive: `z_j = a + j·Δz`, `Δz = (b−a)/(N−1)`, so `z_0 = a`
    /// and `z_{N−1} = b`. Every node carries weight `Δz`. Interval only.
    Closed,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Left => "left",
            Scheme::Midpoint => "midpoint",
            Scheme::Closed => "closed",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = GridError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "left" => Ok(Scheme::Left),
            "midpoint" => Ok(Scheme::Midpoint),
            "closed" => Ok(Scheme::Closed),
            other => Err(GridError::UnknownScheme(other.to_owned())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Topology {
    #[default]
    Interval,
    /// The parameter wraps around: `a` and `b` identify the same point.
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid endpoints must be finite with b > a (got a={a}, b={b})")]
    BadEndpoints { a: f64, b: f64 },
    #[error("grid needs at least 2 nodes (got {0})")]
    TooFewNodes(usize),
    #[error("the closed scheme is not defined on a periodic grid")]
    ClosedPeriodic,
    #[error("point {x} lies outside [{a}, {b}]")]
    OutOfRange { x: f64, a: f64, b: f64 },
    #[error("unknown grid scheme `{0}` (expected left, midpoint or closed)")]
    UnknownScheme(String),
    #[error("expected {expected} values on the grid, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Ordered quadrature nodes with uniform weight `spacing`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    a: f64,
    b: f64,
    scheme: Scheme,
    topology: Topology,
    spacing: f64,
    nodes: Vec<f64>,
}

impl Grid1D {
    pub fn uniform(
        a: f64,
        b: f64,
        n: usize,
        scheme: Scheme,
        topology: Topology,
    ) -> Result<Self, GridError> {
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(GridError::BadEndpoints { a, b });
        }
        if n < 2 {
            return Err(GridError::TooFewNodes(n));
        }
        if scheme == Scheme::Closed && topology == Topology::Periodic {
            return Err(GridError::ClosedPeriodic);
        }
        let width = b - a;
        let (spacing, offset) = match scheme {
            Scheme::Left => (width / n as f64, 0.0),
            Scheme::Midpoint => (width / n as f64, 0.5),
            Scheme::Closed => (width / (n - 1) as f64, 0.0),
        };
        let mut nodes: Vec<f64> = (0..n)
            .map(|j| a + (j as f64 + offset) * spacing)
            .collect();
        if scheme == Scheme::Closed {
            nodes[n - 1] = b;
        }
        Ok(Self {
            a,
            b,
            scheme,
            topology,
            spacing,
            nodes,
        })
    }

    /// Left-node interval grid.
    pub fn interval(a: f64, b: f64, n: usize) -> Result<Self, GridError> {
        Self::uniform(a, b, n, Scheme::Left, Topology::Interval)
    }

    /// Left-node periodic grid on `[0, 2π)`.
    pub fn periodic_angle(n: usize) -> Result<Self, GridError> {
        Self::uniform(
            0.0,
            std::f64::consts::TAU,
            n,
            Scheme::Left,
            Topology::Periodic,
        )
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.a && x <= self.b
    }

    fn period(&self) -> f64 {
        self.b - self.a
    }

    /// Distance between `x` and node `j`, wrapped for periodic grids.
    fn distance(&self, j: usize, x: f64) -> f64 {
        let d = (self.nodes[j] - x).abs();
        match self.topology {
            Topology::Interval => d,
            Topology::Periodic => {
                let p = self.period();
                let d = d.rem_euclid(p);
                d.min(p - d)
            }
        }
    }

    /// Zero-based index of the node closest to `x` and the (wrapped) distance
    /// to it. Ties go to the smaller index.
    pub fn nearest_index(&self, x: f64) -> Result<(usize, f64), GridError> {
        if !x.is_finite() {
            return Err(GridError::OutOfRange {
                x,
                a: self.a,
                b: self.b,
            });
        }
        let n = self.len();
        let first = self.nodes[0];
        let t = match self.topology {
            Topology::Interval => {
                if !self.contains(x) {
                    return Err(GridError::OutOfRange {
                        x,
                        a: self.a,
                        b: self.b,
                    });
                }
                (x - first) / self.spacing
            }
            Topology::Periodic => (x - first).rem_euclid(self.period()) / self.spacing,
        };
        let lo = t.floor();
        let mut candidates = [0usize; 3];
        let mut count = 0;
        for k in [lo - 1.0, lo, lo + 1.0] {
            let idx = match self.topology {
                Topology::Interval => {
                    if k < 0.0 || k >= n as f64 {
                        continue;
                    }
                    k as usize
                }
                Topology::Periodic => (k as i64).rem_euclid(n as i64) as usize,
            };
            candidates[count] = idx;
            count += 1;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        for &idx in &candidates[..count] {
            let d = self.distance(idx, x);
            if d < best.1 || (d == best.1 && idx < best.0) {
                best = (idx, d);
            }
        }
        Ok(best)
    }

    /// Piecewise-linear interpolation of grid `values` at `x`; wraps across
    /// the seam on periodic grids and clamps to the end nodes on intervals.
    pub fn interpolate(&self, values: &[f64], x: f64) -> Result<f64, GridError> {
        let n = self.len();
        if values.len() != n {
            return Err(GridError::LengthMismatch {
                expected: n,
                got: values.len(),
            });
        }
        let first = self.nodes[0];
        match self.topology {
            Topology::Periodic => {
                let t = (x - first).rem_euclid(self.period()) / self.spacing;
                let lo = t.floor();
                let w = t - lo;
                let i = (lo as usize) % n;
                let j = (i + 1) % n;
                Ok((1.0 - w) * values[i] + w * values[j])
            }
            Topology::Interval => {
                if !self.contains(x) {
                    return Err(GridError::OutOfRange {
                        x,
                        a: self.a,
                        b: self.b,
                    });
                }
                let t = ((x - first) / self.spacing).clamp(0.0, (n - 1) as f64);
                let lo = t.floor().min((n - 2) as f64);
                let w = t - lo;
                let i = lo as usize;
                Ok((1.0 - w) * values[i] + w * values[i + 1])
            }
        }
    }

    /// Quadrature `Σ_j f(z_j)·Δz`.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().map(|&z| f(z)).sum::<f64>() * self.spacing
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn node_formulas() {
        let g = Grid1D::uniform(0.0, 1.0, 4, Scheme::Left, Topology::Interval).unwrap();
        assert_eq!(g.nodes(), &[0.0, 0.25, 0.5, 0.75]);
        assert_eq!(g.spacing(), 0.25);

        let g = Grid1D::uniform(0.0, 2.0 * PI, 4, Scheme::Left, Topology::Periodic).unwrap();
        for (z, want) in g.nodes().iter().zip([0.0, PI / 2.0, PI, 1.5 * PI]) {
            assert_abs_diff_eq!(*z, want, epsilon = 1e-15);
        }

        let g = Grid1D::uniform(0.0, 1.0, 4, Scheme::Midpoint, Topology::Interval).unwrap();
        assert_eq!(g.nodes(), &[0.125, 0.375, 0.625, 0.875]);

        let g = Grid1D::uniform(0.0, 1.0, 5, Scheme::Closed, Topology::Interval).unwrap();
        assert_eq!(g.nodes(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(g.spacing(), 0.25);
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            Grid1D::interval(0.0, 1.0, 1),
            Err(GridError::TooFewNodes(1))
        ));
        assert!(matches!(
            Grid1D::interval(1.0, 1.0, 4),
            Err(GridError::BadEndpoints { .. })
        ));
        assert!(Grid1D::interval(f64::NAN, 1.0, 4).is_err());
        assert!(Grid1D::interval(0.0, f64::INFINITY, 4).is_err());
        assert_eq!(
            Grid1D::uniform(0.0, 1.0, 4, Scheme::Closed, Topology::Periodic),
            Err(GridError::ClosedPeriodic)
        );
    }

    #[test]
    fn nearest_index_examples() {
        let g = Grid1D::interval(0.0, 1.0, 4).unwrap();
        assert_eq!(g.nearest_index(0.3).unwrap().0, 1);
        assert_eq!(g.nearest_index(0.5).unwrap(), (2, 0.0));
        // tie between 0.25 and 0.5
        assert_eq!(g.nearest_index(0.375).unwrap().0, 1);
        assert_eq!(g.nearest_index(1.0).unwrap().0, 3);
        assert!(g.nearest_index(1.2).is_err());

        let p = Grid1D::periodic_angle(4).unwrap();
        let (i, d) = p.nearest_index(6.2).unwrap();
        assert_eq!(i, 0);
        assert_abs_diff_eq!(d, 2.0 * PI - 6.2, epsilon = 1e-12);
        assert_eq!(p.nearest_index(-0.1).unwrap().0, 0);
        assert_eq!(p.nearest_index(PI).unwrap(), (2, 0.0));
        // exact tie across the seam goes to index 0
        assert_eq!(p.nearest_index(1.75 * PI).unwrap().0, 0);
    }

    #[test]
    fn periodic_interpolation_wraps() {
        let p = Grid1D::periodic_angle(4).unwrap();
        let v = [1.0, 2.0, 3.0, 5.0];
        assert_abs_diff_eq!(p.interpolate(&v, PI / 4.0).unwrap(), 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p.interpolate(&v, 1.75 * PI).unwrap(), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.interpolate(&v, -PI / 4.0).unwrap(), 3.0, epsilon = 1e-12);
        assert!(p.interpolate(&v[..3], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn left_sum_exact_on_constants(a in -5.0f64..5.0, w in 0.1f64..10.0, n in 2usize..500, c in -10.0f64..10.0) {
            let g = Grid1D::interval(a, a + w, n).unwrap();
            let s = g.integrate(|_| c);
            prop_assert!((s - c * w).abs() <= 1e-12 * (1.0 + (c * w).abs()));
        }

        #[test]
        fn midpoint_exact_on_affine(a in -5.0f64..5.0, w in 0.1f64..10.0, n in 2usize..500,
                                    alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
            let b = a + w;
            let g = Grid1D::uniform(a, b, n, Scheme::Midpoint, Topology::Interval).unwrap();
            let s = g.integrate(|z| alpha * z + beta);
            let exact = alpha * (b * b - a * a) / 2.0 + beta * w;
            prop_assert!((s - exact).abs() <= 1e-10 * (1.0 + exact.abs()));
        }

        #[test]
        fn nodes_strictly_increasing(n in 2usize..300, s in 0usize..3) {
            let scheme = [Scheme::Left, Scheme::Midpoint, Scheme::Closed][s];
            let g = Grid1D::uniform(-1.0, 2.0, n, scheme, Topology::Interval).unwrap();
            prop_assert!(g.nodes().windows(2).all(|w| w[0] < w[1]));
            prop_assert!(g.spacing() > 0.0);
        }
    }
}
