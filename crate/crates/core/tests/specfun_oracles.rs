mod common;

use common::{j0_bigint, marcum_q1_oracle};
use fluidsec::specfun::{bessel_i0_scaled, bessel_j0, chebyshev_rule, marcum_q1, marcum_q1_pair};
use proptest::prelude::*;

#[test]
fn bigint_oracle_self_check() {
    assert_eq!(j0_bigint(0.0), 1.0);
    assert!((j0_bigint(1.0) - 0.765_197_686_557_966_6).abs() < 1e-15);
}

#[test]
fn j0_matches_series_oracle_to_fifty() {
    let mut worst: f64 = 0.0;
    for i in 0..=5000 {
        let x = i as f64 * 0.01;
        let err = (bessel_j0(x).unwrap() - j0_bigint(x)).abs();
        worst = worst.max(err);
    }
    assert!(worst < 1e-12, "worst error {worst:e}");
}

#[test]
fn j0_matches_series_oracle_to_two_hundred() {
    let mut worst: f64 = 0.0;
    for i in 0..=1500 {
        let x = 50.0 + i as f64 * 0.1 + 0.037;
        let err = (bessel_j0(x).unwrap() - j0_bigint(x)).abs();
        worst = worst.max(err);
    }
    assert!(worst < 1e-12, "worst error {worst:e}");
}

#[test]
fn j0_first_zero() {
    assert!(bessel_j0(2.404_825_557_7).unwrap().abs() < 1e-8);
}

#[test]
fn i0_scaled_matches_trapezoid_oracle() {
    for i in 0..=400 {
        let x = i as f64 * 0.25;
        let got = bessel_i0_scaled(x).unwrap();
        let want = common::i0e_trapezoid(x);
        assert!((got / want - 1.0).abs() < 1e-13, "x={x}: {got} vs {want}");
    }
}

#[test]
fn marcum_matches_integration_oracle_on_grid() {
    let mut worst: f64 = 0.0;
    for i in 0..=32 {
        for j in 0..=32 {
            let (a, b) = (i as f64 * 0.25, j as f64 * 0.25);
            let err = (marcum_q1(a, b).unwrap() - marcum_q1_oracle(a, b)).abs();
            worst = worst.max(err);
        }
    }
    assert!(worst < 1e-8, "worst error {worst:e}");
}

#[test]
fn marcum_large_arguments_match_oracle() {
    for (a, b) in [(12.0, 11.0), (20.0, 23.5), (30.0, 26.0), (40.0, 40.0), (7.0, 14.0)] {
        let m = marcum_q1_pair(a, b).unwrap();
        let want = marcum_q1_oracle(a, b);
        assert!((m.q - want).abs() < 1e-10, "({a},{b}): {} vs {want}", m.q);
    }
}

proptest! {
    #[test]
    fn marcum_in_unit_interval_and_monotone(a in 0.0f64..40.0, b in 0.0f64..40.0, step in 1e-3f64..2.0) {
        let q = marcum_q1(a, b).unwrap();
        prop_assert!((0.0..=1.0).contains(&q));
        prop_assert!(marcum_q1(a, b + step).unwrap() <= q + 1e-15);
        prop_assert!(marcum_q1(a + step, b).unwrap() >= q - 1e-15);
    }

    #[test]
    fn marcum_vanishes_twelve_past_a(a in 0.0f64..60.0) {
        prop_assert_eq!(marcum_q1(a, 0.0).unwrap(), 1.0);
        prop_assert!(marcum_q1(a, a + 12.0).unwrap() < 1e-8);
    }

    #[test]
    fn j0_even_and_bounded(x in -200.0f64..200.0) {
        let v = bessel_j0(x).unwrap();
        prop_assert_eq!(v.to_bits(), bessel_j0(-x).unwrap().to_bits());
        prop_assert!(v.abs() <= 1.0);
    }

    #[test]
    fn i0_scaled_in_unit_interval_and_decreasing(x in 0.0f64..500.0, step in 1e-3f64..5.0) {
        let v = bessel_i0_scaled(x).unwrap();
        prop_assert!(v > 0.0 && v <= 1.0);
        prop_assert!(bessel_i0_scaled(x + step).unwrap() < v);
    }

    #[test]
    fn chebyshev_nodes_follow_definition(u in 1usize..200) {
        let rule = chebyshev_rule(u).unwrap();
        prop_assert_eq!(rule.order(), u);
        for (p, &t) in rule.nodes().iter().enumerate() {
            let expect = ((2 * p + 1) as f64 * std::f64::consts::PI / (2 * u) as f64).cos();
            prop_assert_eq!(t, expect);
            prop_assert!(t > -1.0 && t < 1.0);
        }
        prop_assert!(rule.nodes().windows(2).all(|w| w[0] > w[1]));
    }
}
