mod common;

use common::{clamped_knots, midpoint_gram, naive_bspline, uniform};
use fae_core::basis::{BasisSystem, Domain};
use fae_core::quadrature::trapezoid_weights;
use fae_core::Error;
use proptest::prelude::*;

#[test]
fn order_three_matches_naive_recursion_at_midpoint() {
    let basis = BasisSystem::bspline(Domain::unit(), 5, 3).unwrap();
    let knots = clamped_knots(0.0, 1.0, 5, 3);
    assert_eq!(basis.knots(), knots.as_slice());
    let got = basis.evaluate(0.5).unwrap();
    for (i, g) in got.iter().enumerate() {
        assert!((g - naive_bspline(&knots, i, 3, 0.5)).abs() < 1e-14);
    }
}

#[test]
fn cubic_matches_naive_recursion_on_irregular_domain() {
    let domain = Domain::new(-2.0, 3.5).unwrap();
    let basis = BasisSystem::bspline(domain, 9, 4).unwrap();
    let knots = clamped_knots(-2.0, 3.5, 9, 4);
    for k in 0..=200 {
        let t = -2.0 + 5.5 * k as f64 / 200.0;
        let got = basis.evaluate(t).unwrap();
        for (i, g) in got.iter().enumerate() {
            assert!((g - naive_bspline(&knots, i, 4, t)).abs() < 1e-13, "t={t}, i={i}");
        }
    }
}

#[test]
fn single_point_design_matrix() {
    let basis = BasisSystem::cubic_unit(6).unwrap();
    let d = basis.design_matrix(&[0.37]).unwrap();
    assert_eq!(d.rows(), 1);
    assert_eq!(d.row(0), basis.evaluate(0.37).unwrap().as_slice());
}

#[test]
fn design_matrix_rejects_unsorted_times() {
    let basis = BasisSystem::cubic_unit(6).unwrap();
    assert!(matches!(basis.design_matrix(&[0.2, 0.1]), Err(Error::Argument(_))));
    assert!(matches!(basis.design_matrix(&[0.2, 0.2]), Err(Error::Argument(_))));
    assert!(matches!(basis.evaluate(1.01), Err(Error::Domain { .. })));
}

#[test]
fn cubic_gram_matches_fine_midpoint_oracle() {
    let basis = BasisSystem::cubic_unit(8).unwrap();
    let g = basis.gram_matrix(10_001).unwrap();
    let oracle = midpoint_gram(&basis, 100_000);
    for a in 0..8 {
        for b in 0..8 {
            assert!((g[(a, b)] - oracle[a][b]).abs() < 1e-6);
            assert!((g[(a, b)] - g[(b, a)]).abs() < 1e-14);
        }
    }
}

#[test]
fn gram_is_positive_semidefinite() {
    for basis in [
        BasisSystem::cubic_unit(12).unwrap(),
        BasisSystem::fourier(Domain::unit(), 7).unwrap(),
        BasisSystem::bspline(Domain::unit(), 4, 1).unwrap(),
    ] {
        let g = basis.gram_matrix(2001).unwrap();
        let eig = nalgebra::DMatrix::from_row_slice(g.rows(), g.cols(), g.as_slice()).symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&l| l > -1e-10));
    }
}

#[test]
fn fourier_gram_off_diagonals_shrink_with_resolution() {
    let basis = BasisSystem::fourier(Domain::unit(), 3).unwrap();
    let off = |res: usize| {
        let g = basis.gram_matrix(res).unwrap();
        let mut worst: f64 = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                if a != b {
                    worst = worst.max(g[(a, b)].abs());
                }
            }
        }
        worst
    };
    assert!(off(10_001) <= off(11) + 1e-15);
    assert!(off(10_001) < 1e-10);
}

#[test]
fn trapezoid_is_second_order_on_squares() {
    let err = |n: usize| {
        let t = uniform(n);
        let q = trapezoid_weights(&t).unwrap();
        let f: Vec<f64> = t.iter().map(|x| x * x).collect();
        (q.integrate(&f).unwrap() - 1.0 / 3.0).abs()
    };
    for n in [11, 21, 41] {
        let ratio = err(n) / err(2 * n - 1);
        assert!((ratio - 4.0).abs() < 0.05, "ratio {ratio}");
    }
}

#[test]
fn trapezoid_rejects_bad_grids() {
    assert!(matches!(trapezoid_weights(&[0.5]), Err(Error::Argument(_))));
    assert!(matches!(trapezoid_weights(&[0.0, 0.5, 0.5]), Err(Error::Argument(_))));
}

fn sorted_grid() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.001f64..1.0, 0..30).prop_map(|mut inner| {
        inner.sort_by(f64::total_cmp);
        inner.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        let mut t = vec![0.0];
        t.extend(inner.into_iter().filter(|&x| x < 1.0 - 1e-9));
        t.push(1.0);
        t
    })
}

proptest! {
    #[test]
    fn partition_of_unity_and_local_support(t in 0.0f64..=1.0, m in 4usize..16, order in 1usize..5) {
        prop_assume!(m >= order);
        let basis = BasisSystem::bspline(Domain::unit(), m, order).unwrap();
        let v = basis.evaluate(t).unwrap();
        prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(v.iter().all(|&x| x >= 0.0));
        prop_assert!(v.iter().filter(|&&x| x != 0.0).count() <= order);
    }

    #[test]
    fn trapezoid_exact_on_affine(t in sorted_grid(), a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let q = trapezoid_weights(&t).unwrap();
        let f: Vec<f64> = t.iter().map(|x| a * x + b).collect();
        prop_assert!((q.integrate(&f).unwrap() - (a / 2.0 + b)).abs() < 1e-13);
        prop_assert!((q.weights().iter().sum::<f64>() - 1.0).abs() < 1e-14);
        prop_assert!(q.weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn design_rows_match_evaluate(t in sorted_grid(), m in 4usize..12) {
        let basis = BasisSystem::cubic_unit(m).unwrap();
        let d = basis.design_matrix(&t).unwrap();
        for (j, &tj) in t.iter().enumerate() {
            let row = basis.evaluate(tj).unwrap();
            prop_assert_eq!(d.row(j), row.as_slice());
            prop_assert!((d.row(j).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
