mod common;

use common::{cursor, gaussian, low_rank, na_pinv, na_vec, norm, normal_vec, rel_diff, to_na};
use mollify_core::proximal::{
    fixed_point_map, least_squares_objective, ppa_min_norm_lsq, ppa_quadratic_with, ppa_tikhonov, prox_step,
    run_proximal, InnerTolerances, LambdaSchedule, ProxConfig, ProxStatus,
};
use mollify_core::pseudoinverse::svd_factor;
use mollify_core::vector::distance;
use mollify_core::{LinearMap, Matrix};
use proptest::prelude::*;

const INNER: InnerTolerances = InnerTolerances { tol: 1e-14, max_iters: 2000 };

fn config(epsilon: f64) -> ProxConfig {
    ProxConfig { epsilon, outer_tol: 1e-13, max_outer: 5000, inner_tol: INNER.tol, max_inner: INNER.max_iters }
}

fn schedules(r: &Matrix) -> [LambdaSchedule; 3] {
    let s2 = svd_factor(r).unwrap().largest_singular_value().powi(2);
    [
        LambdaSchedule::Constant(1e3 / s2),
        LambdaSchedule::Harmonic { lambda0: 1e5 / s2 },
        LambdaSchedule::geometric_for_norm(s2.sqrt(), 10.0),
    ]
}

/// Rank-deficient systems with a data component outside the range.
fn instances(count: usize) -> Vec<(Matrix, Vec<f64>)> {
    let mut c = cursor("ppa-instances", 11);
    (0..count)
        .map(|i| {
            let m = 5 + i % 8;
            let n = 3 + (i * 5) % 6;
            let rank = 1 + i % (m.min(n) - 1).max(1);
            let r = low_rank(&mut c, m, n, rank.min(m.min(n) - 1).max(1));
            let g = normal_vec(&mut c, m);
            (r, g)
        })
        .collect()
}

#[test]
fn min_norm_limit_for_every_schedule() {
    for (idx, (r, g)) in instances(20).iter().enumerate() {
        let svd = svd_factor(r).unwrap();
        let target: Vec<f64> = (na_pinv(r) * na_vec(g)).iter().copied().collect();
        for schedule in schedules(r) {
            let mut previous = norm(&target);
            let mut fejer_ok = true;
            let (x, trace) = run_proximal(r, g, &vec![0.0; r.cols()], schedule, config(0.0), |_, x| {
                let d = distance(x, &target);
                fejer_ok &= d <= previous * (1.0 + 1e-9) + 1e-14;
                previous = d;
            })
            .unwrap();
            assert_eq!(trace.status, ProxStatus::Converged, "instance {idx} {schedule:?}");
            let err = rel_diff(&x, &target);
            assert!(err <= 1e-6, "instance {idx} {schedule:?}: {err:e}");
            assert!(norm(&svd.kernel_component(&x).unwrap()) <= 1e-7 * norm(&x));
            assert!(fejer_ok, "instance {idx} {schedule:?}: distance to R†g increased");
            let objectives: Vec<f64> = trace.objectives().collect();
            for w in objectives.windows(2) {
                assert!(w[1] <= w[0] + 10.0 * INNER.tol * (1.0 + w[0]), "instance {idx}: {} -> {}", w[0], w[1]);
            }
            let (same, _) = ppa_min_norm_lsq(r, g, schedule, config(0.0)).unwrap();
            assert_eq!(same, x);
        }
    }
}

#[test]
fn tikhonov_limit_matches_dense_solve() {
    for (idx, (r, g)) in instances(20).iter().enumerate() {
        let a = to_na(r);
        for epsilon in [1e-2, 1e-6] {
            let normal = a.transpose() * &a + nalgebra::DMatrix::identity(r.cols(), r.cols()) * epsilon;
            let rhs = a.transpose() * na_vec(g);
            let dense: Vec<f64> = normal.cholesky().unwrap().solve(&rhs).iter().copied().collect();
            for schedule in schedules(r) {
                let (x, trace) = ppa_tikhonov(r, g, schedule, config(epsilon)).unwrap();
                assert_eq!(trace.status, ProxStatus::Converged);
                let err = rel_diff(&x, &dense);
                assert!(err <= 1e-6, "instance {idx} ε={epsilon} {schedule:?}: {err:e}");
            }
        }
    }
}

#[test]
fn tikhonov_shrinks_with_epsilon() {
    let (r, g) = &instances(3)[2];
    let schedule = LambdaSchedule::Constant(1.0);
    let small = ppa_tikhonov(r, g, schedule, config(0.1)).unwrap().0;
    let large = ppa_tikhonov(r, g, schedule, config(10.0)).unwrap().0;
    assert!(norm(&large) < norm(&small));
    assert!(ppa_min_norm_lsq(r, g, schedule, config(0.1)).is_err());
    assert!(ppa_tikhonov(r, g, schedule, config(0.0)).is_err());
}

#[test]
fn pseudo_inverse_is_a_fixed_point() {
    for (r, g) in instances(20) {
        let target: Vec<f64> = (na_pinv(&r) * na_vec(&g)).iter().copied().collect();
        let s2 = svd_factor(&r).unwrap().largest_singular_value().powi(2);
        for lambda in [0.1 / s2, 1.0 / s2, 100.0 / s2] {
            let h = fixed_point_map(&r, &g, lambda, &target, INNER).unwrap();
            assert!(distance(&h, &target) <= 1e-8 * (1.0 + norm(&target)));
        }
    }
}

#[test]
fn fixed_point_map_contracts_on_injective_systems() {
    let mut c = cursor("contraction", 5);
    for pair in 0..100 {
        let (m, n) = (6 + pair % 5, 2 + pair % 4);
        let r = gaussian(&mut c, m, n);
        let g = normal_vec(&mut c, m);
        let svd = svd_factor(&r).unwrap();
        assert_eq!(svd.rank, n);
        let s_min = svd.singular_values[n - 1];
        let lambda = 1.0 / svd.largest_singular_value().powi(2);
        let bound = 1.0 / (1.0 + lambda * s_min * s_min);
        let a = normal_vec(&mut c, n);
        let b = normal_vec(&mut c, n);
        let ha = fixed_point_map(&r, &g, lambda, &a, INNER).unwrap();
        let hb = fixed_point_map(&r, &g, lambda, &b, INNER).unwrap();
        let ratio = distance(&ha, &hb) / distance(&a, &b);
        assert!(ratio < 1.0 && ratio <= bound * (1.0 + 1e-8), "pair {pair}: {ratio} vs {bound}");
    }
}

#[test]
fn constant_step_equals_fixed_point_map() {
    let (r, g) = &instances(5)[4];
    let x: Vec<f64> = (0..r.cols()).map(|i| (i as f64).sin()).collect();
    let step = prox_step(r, g, &x, 0.7, 0.0, INNER).unwrap().x;
    let h = fixed_point_map(r, g, 0.7, &x, INNER).unwrap();
    assert_eq!(step, h);
}

#[test]
fn identity_quadratic_closed_form() {
    let a = [1.0, -2.0, 0.5];
    let q = Matrix::identity(3);
    let mut iterates = Vec::new();
    let cfg = ProxConfig { epsilon: 0.0, outer_tol: 1e-300, max_outer: 30, inner_tol: 1e-12, max_inner: 10 };
    ppa_quadratic_with(&q, &a, &[0.0; 3], LambdaSchedule::Constant(1.0), cfg, |rec, x| iterates.push((rec.k, x.to_vec())))
        .unwrap();
    for (k, x) in iterates {
        let factor = 1.0 - 0.5f64.powi(k as i32);
        for (xi, ai) in x.iter().zip(&a) {
            assert!((xi - ai * factor).abs() < 1e-14, "k={k}");
        }
    }
}

#[test]
fn identity_step_closed_form() {
    let g = [2.0, -4.0];
    let x = prox_step(&Matrix::identity(2), &g, &[0.0, 0.0], 1.0, 0.0, INNER).unwrap().x;
    assert!(rel_diff(&x, &[1.0, -2.0]) < 1e-14);
    let x = prox_step(&Matrix::identity(2), &g, &[1.0, 1.0], 3.0, 0.0, INNER).unwrap().x;
    assert!(rel_diff(&x, &[(1.0 + 3.0 * 2.0) / 4.0, (1.0 - 3.0 * 4.0) / 4.0]) < 1e-14);
    assert!(prox_step(&Matrix::identity(2), &g, &[0.0, 0.0], 0.0, 0.0, INNER).is_err());
    assert!(prox_step(&Matrix::identity(2), &g, &[0.0, 0.0], 1.0, -1.0, INNER).is_err());
}

#[test]
fn schedules_are_positive_with_divergent_sums() {
    for schedule in [
        LambdaSchedule::Constant(0.5),
        LambdaSchedule::Harmonic { lambda0: 2.0 },
        LambdaSchedule::GeometricFloor { lambda0: 100.0, ratio: 0.7, floor: 1.0 },
    ] {
        schedule.validate().unwrap();
        let partial: f64 = (0..10_000).map(|k| schedule.lambda(k)).sum();
        assert!((0..10_000).all(|k| schedule.lambda(k) > 0.0));
        assert!(partial > 15.0, "{schedule:?}");
    }
    assert_eq!(LambdaSchedule::GeometricFloor { lambda0: 100.0, ratio: 0.7, floor: 1.0 }.lambda(100), 1.0);
    assert!(LambdaSchedule::Constant(-1.0).validate().is_err());
    assert!(LambdaSchedule::GeometricFloor { lambda0: 1.0, ratio: 1.5, floor: 1.0 }.validate().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn single_step_descends_within_row_space(
        rows in 2usize..8,
        cols in 2usize..8,
        lambda in 1e-3f64..1e3,
        seed in any::<u64>(),
    ) {
        let mut c = cursor("prop-step", seed);
        let r = low_rank(&mut c, rows, cols, 1 + rows.min(cols) / 2);
        let g = normal_vec(&mut c, rows);
        let x0 = vec![0.0; cols];
        let x1 = prox_step(&r, &g, &x0, lambda, 0.0, INNER).unwrap().x;
        let f0 = least_squares_objective(&r, &g, &x0, 0.0).unwrap();
        let f1 = least_squares_objective(&r, &g, &x1, 0.0).unwrap();
        prop_assert!(f1 <= f0 + 1e-12 * (1.0 + f0));
        let svd = svd_factor(&r).unwrap();
        prop_assert!(norm(&svd.kernel_component(&x1).unwrap()) <= 1e-9 * (1.0 + norm(&x1)));
        // The step direction is −λ Rᵀ(R x1 − g).
        let residual: Vec<f64> = r.forward(&x1).unwrap().iter().zip(&g).map(|(a, b)| a - b).collect();
        let predicted: Vec<f64> = r.adjoint(&residual).unwrap().iter().map(|v| -lambda * v).collect();
        prop_assert!(distance(&x1, &predicted) <= 1e-8 * (1.0 + norm(&x1)));
    }
}
