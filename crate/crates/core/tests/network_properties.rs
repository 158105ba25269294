use std::f64::consts::{E, FRAC_PI_2};

use fredholm_core::laplace::{build_bie, DiscBoundaryProblem};
use fredholm_core::linalg::max_abs_diff;
use fredholm_core::net::{dense_solve, error_bound, plan_layers, ErrorBudget, FredholmNet};
use fredholm_core::operator::{apply_km_step, discretize, estimate_contraction, DiscreteOperator, FieProblem, KmSchedule};
use fredholm_core::{Fn1, Fn2, Grid1D, Scheme, Topology};
use proptest::prelude::*;

fn ex1(n: usize) -> DiscreteOperator {
    let p = FieProblem::linear(Fn2::constant(1.0 / E), Fn1::native("exp(x)", f64::exp), 0.0, 1.0);
    discretize(&p, &Grid1D::interval(0.0, 1.0, n).unwrap()).unwrap()
}

fn ex2(n: usize) -> DiscreteOperator {
    let p = FieProblem::linear(
        Fn2::native("sin(x)cos(z)", |x, z| x.sin() * z.cos()),
        Fn1::native("sin(x)", f64::sin),
        0.0,
        FRAC_PI_2,
    );
    discretize(&p, &Grid1D::interval(0.0, FRAC_PI_2, n).unwrap()).unwrap()
}

fn disc(n: usize) -> DiscreteOperator {
    build_bie(&DiscBoundaryProblem::new(
        Fn1::native("1+cos(2phi)", |p| 1.0 + (2.0 * p).cos()),
        n,
        1,
    ))
    .unwrap()
}

fn explicit_km(op: &DiscreteOperator, schedule: &KmSchedule, layers: usize) -> Vec<f64> {
    let mut h: Vec<f64> = op.source_vector().iter().map(|v| schedule.kappa(1) * v).collect();
    for m in 2..=layers {
        h = apply_km_step(op, &h, schedule.kappa(m)).unwrap();
    }
    h
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn forward_pass_is_the_km_iteration(
        which in 0usize..3,
        kappa in 0.05f64..=1.0,
        layers in 1usize..25,
    ) {
        let op = [ex1, ex2, disc][which](64);
        let schedule = KmSchedule::Constant(kappa);
        let net = FredholmNet::build(op.clone(), layers, schedule.clone()).unwrap();
        let field = net.forward().unwrap();
        let h = explicit_km(&op, &schedule, layers);
        for (a, b) in field.values.iter().zip(&h) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(f64::MIN_POSITIVE), "{} vs {}", a, b);
        }
    }

    #[test]
    fn sequence_schedules_match_too(
        kappas in prop::collection::vec(0.05f64..=1.0, 1..8),
        layers in 1usize..12,
    ) {
        let op = ex2(64);
        let schedule = KmSchedule::Sequence(kappas);
        let field = FredholmNet::build(op.clone(), layers, schedule.clone()).unwrap().forward().unwrap();
        let h = explicit_km(&op, &schedule, layers);
        for (a, b) in field.values.iter().zip(&h) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(f64::MIN_POSITIVE));
        }
    }

    #[test]
    fn iterates_obey_the_contraction_bound(
        scale in 0.05f64..0.9,
        shift in -1.0f64..1.0,
        layers in 2usize..20,
    ) {
        // K(x,z) = scale·cos(x − z + shift), row sums ≤ scale on [0, 1]
        let p = FieProblem::linear(
            Fn2::native("scale cos", move |x, z| scale * (x - z + shift).cos()),
            Fn1::native("1+x", |x| 1.0 + x),
            0.0,
            1.0,
        );
        let op = discretize(&p, &Grid1D::interval(0.0, 1.0, 48).unwrap()).unwrap();
        let q = estimate_contraction(&op);
        prop_assume!(q < 1.0);
        let exact = dense_solve(&op).unwrap().field.values;
        let hist = FredholmNet::build(op, layers, KmSchedule::Constant(1.0))
            .unwrap()
            .forward_with_history()
            .unwrap()
            .history
            .unwrap();
        let step = max_abs_diff(&hist[1], &hist[0]);
        let slack = 8.0 * 48.0 * f64::EPSILON * exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let bound = q.powi(layers as i32 - 1) / (1.0 - q) * step + slack;
        prop_assert!(max_abs_diff(&hist[layers - 1], &exact) <= bound);
    }

    #[test]
    fn planned_depth_is_minimal(
        q in 0.01f64..0.95,
        d in 0.0f64..10.0,
        residual in 1e-3f64..10.0,
        log_eps in -12.0f64..-1.0,
    ) {
        let b = ErrorBudget { q, d, a: 0.0, b: 1.0, n: 500, residual };
        let eps = 10f64.powf(log_eps);
        let plan = plan_layers(&b, eps).unwrap();
        prop_assert!(error_bound(&b, plan.layers).unwrap() <= eps * (1.0 + 1e-12));
        if plan.layers > 0 {
            prop_assert!(error_bound(&b, plan.layers - 1).unwrap() > eps);
        }
    }

    #[test]
    fn query_layer_at_nodes_is_one_more_step(layers in 1usize..10) {
        let op = ex2(40);
        let net = FredholmNet::build(op.clone(), layers, KmSchedule::Constant(1.0)).unwrap();
        let field = net.forward().unwrap();
        let at_nodes = net.query(&field, op.grid().nodes()).unwrap();
        let step = apply_km_step(&op, &field.values, 1.0).unwrap();
        prop_assert!(max_abs_diff(&at_nodes, &step) <= 1e-14);
    }
}

#[test]
fn closed_grid_contraction_is_slightly_above_the_continuous_one() {
    let p = FieProblem::linear(Fn2::constant(1.0 / E), Fn1::constant(1.0), 0.0, 1.0);
    let g = Grid1D::uniform(0.0, 1.0, 11, Scheme::Closed, Topology::Interval).unwrap();
    let q = estimate_contraction(&discretize(&p, &g).unwrap());
    assert!((q - 1.1 / E).abs() < 1e-15);
}
