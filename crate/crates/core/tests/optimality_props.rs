//! Algebraic properties of multipliers, projected Hessians and the curvature
//! comparison on random problems with a constructed stationary point.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use socurv_core::battery::{random_stationary, BatteryCase, RandomOptions};
use socurv_core::geometry::{self, DerivativeBundle};
use socurv_core::optimality::{
    curvature_comparison, default_directions, lagrangian_hessian, multipliers, second_order_report,
};
use socurv_core::Problem;

const OPTS: RandomOptions = RandomOptions {
    quartic: true,
    curved_constraints: true,
};

fn case(seed: u64, n: usize, m: usize) -> BatteryCase {
    random_stationary(&mut ChaCha8Rng::seed_from_u64(seed), n, m, OPTS)
}

fn dims() -> impl Strategy<Value = (usize, usize)> {
    (2usize..=8).prop_flat_map(|n| (Just(n), 1..n))
}

fn unit_tangent(b: &DerivativeBundle, coords: &[f64]) -> DVector<f64> {
    let v = geometry::tangent_basis(b).unwrap();
    let a = DVector::from_iterator(v.dim(), coords.iter().copied().cycle().take(v.dim()));
    let d = v.lift(&a);
    let norm = d.norm();
    d / norm
}

/// Rebuilds the problem with `f` multiplied by `c`.
fn scaled(p: &Problem, c: f64) -> Problem {
    let f = format!("({c:?}) * ({})", p.objective());
    let g: Vec<String> = p.constraints().iter().map(|g| g.to_string()).collect();
    let refs: Vec<&str> = g.iter().map(String::as_str).collect();
    Problem::parse(p.n(), &f, &refs).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn curvature_gap_is_the_lagrangian_quadratic_form(
        seed in any::<u64>(),
        (n, m) in dims(),
        coords in proptest::collection::vec(-1.0..1.0f64, 1..8),
    ) {
        prop_assume!(coords.iter().any(|c| c.abs() > 1e-3));
        let c = case(seed, n, m);
        let b = c.problem.bundle(&c.x_star).unwrap();
        let ms = multipliers(&b).unwrap();
        let v = unit_tangent(&b, &coords);
        let r = curvature_comparison(&b, &ms, std::slice::from_ref(&v), None).unwrap();
        prop_assert!(r.identity_residuals[0] <= 1e-8, "residual {}", r.identity_residuals[0]);

        // independent evaluation of the same identity
        let hl = lagrangian_hessian(&b, &ms.lambda).unwrap();
        let expect = v.dot(&(&hl * &v)) / b.grad_f().norm();
        prop_assert!((r.gaps[0] - expect).abs() <= 1e-8 * (1.0 + expect.abs()));
    }

    #[test]
    fn comparison_verdict_matches_necessary_condition(seed in any::<u64>(), (n, m) in dims()) {
        let c = case(seed, n, m);
        let b = c.problem.bundle(&c.x_star).unwrap();
        let ms = multipliers(&b).unwrap();
        let v = geometry::tangent_basis(&b).unwrap();
        let so = second_order_report(&b, &ms, &v, None).unwrap();
        let r = curvature_comparison(&b, &ms, &default_directions(&so, &v), None).unwrap();
        prop_assert_eq!(r.holds, so.necessary_holds);
        let min_gap = r.min_gap().unwrap();
        prop_assert!((min_gap - so.eigenvalues[0] / b.grad_f().norm()).abs() <= 1e-8);
    }

    #[test]
    fn multipliers_minimize_the_residual(
        seed in any::<u64>(),
        (n, m) in dims(),
        dir in proptest::collection::vec(-1.0..1.0f64, 8),
        offset in proptest::collection::vec(-0.3..0.3f64, 8),
    ) {
        let c = case(seed, n, m);
        // move off the stationary point so the residual is not zero
        let x: Vec<f64> = c.x_star.iter().zip(&offset).map(|(a, b)| a + b).collect();
        let b = c.problem.bundle(&x).unwrap();
        let Ok(ms) = multipliers(&b) else { return Ok(()); };
        let delta = DVector::from_column_slice(&dir[..m]);
        prop_assume!(delta.norm() > 1e-6);
        let scale = 1e-3 / delta.norm();
        let delta = delta * scale;
        let lambda = ms.lambda_vector() + delta;
        let res = (b.grad_f() - b.jac_g().transpose() * lambda).norm();
        prop_assert!(res >= ms.residual_norm, "{} < {}", res, ms.residual_norm);
    }

    #[test]
    fn scaling_the_objective(seed in any::<u64>(), (n, m) in dims(), c in prop_oneof![Just(0.1), Just(10.0), 0.01..100.0f64]) {
        let case = case(seed, n, m);
        let base = case.problem.bundle(&case.x_star).unwrap();
        let sp = scaled(&case.problem, c);
        let sb = sp.bundle(&case.x_star).unwrap();
        let (ms0, ms1) = (multipliers(&base).unwrap(), multipliers(&sb).unwrap());
        for (l0, l1) in ms0.lambda.iter().zip(&ms1.lambda) {
            prop_assert!((l1 - c * l0).abs() <= 1e-12 * (c * l0).abs().max(1e-300) + 1e-13);
        }
        let v = geometry::tangent_basis(&base).unwrap();
        let so0 = second_order_report(&base, &ms0, &v, None).unwrap();
        let so1 = second_order_report(&sb, &ms1, &v, None).unwrap();
        for (e0, e1) in so0.eigenvalues.iter().zip(&so1.eigenvalues) {
            prop_assert!((e1 - c * e0).abs() <= 1e-10 * (1.0 + (c * e0).abs()));
        }
        prop_assert_eq!(so0.necessary_holds, so1.necessary_holds);
        prop_assert_eq!(so0.sufficient_holds, so1.sufficient_holds);
        let dirs = default_directions(&so0, &v);
        let r0 = curvature_comparison(&base, &ms0, &dirs, None).unwrap();
        let r1 = curvature_comparison(&sb, &ms1, &dirs, None).unwrap();
        prop_assert_eq!(r0.holds, r1.holds);
        for (g0, g1) in r0.gaps.iter().zip(&r1.gaps) {
            if g0.abs() > 1e-9 {
                prop_assert_eq!(g0.signum(), g1.signum());
            }
        }
    }

    #[test]
    fn projectors_and_bases(seed in any::<u64>(), (n, m) in dims()) {
        let c = case(seed, n, m);
        let b = c.problem.bundle(&c.x_star).unwrap();
        let pg = geometry::projector_constraint(&b).unwrap();
        let pf = geometry::projector_hypersurface(&b).unwrap();
        for (p, rank) in [(&pg, n - m), (&pf, n - 1)] {
            let mat = p.matrix();
            prop_assert!((mat - mat.transpose()).amax() <= 1e-12);
            prop_assert!((mat * mat - mat).amax() <= 1e-10);
            prop_assert!((mat.trace() - rank as f64).abs() <= 1e-8);
        }
        prop_assert!((pg.matrix() * b.jac_g().transpose()).amax() <= 1e-9 * (1.0 + b.jac_g().amax()));
        let v = geometry::tangent_basis(&b).unwrap();
        let vm = v.matrix();
        prop_assert!((vm.transpose() * vm - DMatrix::identity(n - m, n - m)).amax() <= 1e-12);
        prop_assert!((b.jac_g() * vm).amax() <= 1e-10 * (1.0 + b.jac_g().amax()));
        // the tangent basis spans the range of the projector
        prop_assert!((vm * vm.transpose() - pg.matrix()).amax() <= 1e-10);
    }
}

#[test]
fn reports_are_thread_safe_values() {
    fn assert_send_sync<T: Send + Sync>() {}
    assert_send_sync::<Problem>();
    assert_send_sync::<DerivativeBundle>();
    assert_send_sync::<socurv_core::SecondOrderReport>();
    assert_send_sync::<socurv_core::CurvatureComparisonReport>();
    assert_send_sync::<socurv_core::ReducedFunctional>();
    assert_send_sync::<socurv_core::TracedCurve>();

    // the same problem evaluated from several threads gives identical reports
    let c = case(11, 5, 2);
    let reports: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..4)
            .map(|_| {
                s.spawn(|| {
                    let b = c.problem.bundle(&c.x_star).unwrap();
                    let ms = multipliers(&b).unwrap();
                    let v = geometry::tangent_basis(&b).unwrap();
                    second_order_report(&b, &ms, &v, None).unwrap()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert!(reports.windows(2).all(|w| w[0] == w[1]));
}
