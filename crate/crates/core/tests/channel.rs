mod common;

use fluidsec::channel::{
    build_covariance, coloring_factor, eigen_decompose, eigen_spectrum, jakes_coefficient, Covariance,
    FasGeometry,
};
use fluidsec::linalg::Matrix;
use fluidsec::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

fn geometry(n: usize, w: f64, eta: f64) -> FasGeometry {
    FasGeometry::new(n, w, eta).unwrap()
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.dim()).map(|i| m.row(i).to_vec()).collect()
}

#[test]
fn adjacent_port_coefficients() {
    let c = jakes_coefficient(2, 3, &geometry(5, 2.0, 1.0)).unwrap();
    assert!((c - common::j0_bigint(PI)).abs() < 1e-13);
    assert!((c + 0.3042).abs() < 1e-4);
    let c = jakes_coefficient(7, 8, &geometry(21, 5.0, 1.0)).unwrap();
    assert!((c - 0.4720).abs() < 1e-4);
    assert_eq!(jakes_coefficient(4, 4, &geometry(21, 5.0, 1.0)).unwrap(), 1.0);
}

#[test]
fn indices_are_one_based_and_checked() {
    let g = geometry(5, 2.0, 1.0);
    assert!(jakes_coefficient(0, 1, &g).is_err());
    assert!(jakes_coefficient(1, 6, &g).is_err());
    assert!(jakes_coefficient(5, 5, &g).is_ok());
}

#[test]
fn two_port_covariance() {
    let cov = build_covariance(&geometry(2, 0.5, 1.0));
    let off = common::j0_bigint(PI);
    assert_eq!(cov.get(0, 0), 1.0);
    assert!((cov.get(0, 1) - off).abs() < 1e-13);
    assert_eq!(cov.get(0, 1), cov.get(1, 0));
}

#[test]
fn eigenvalues_match_inertia_oracle() {
    for (n, w) in [(5, 2.0), (8, 1.5), (12, 4.0), (20, 4.0)] {
        let cov = build_covariance(&geometry(n, w, 1.0));
        let got = eigen_spectrum(&cov).unwrap();
        let want = common::eigenvalues_by_bisection(&rows(cov.entries()));
        for (a, b) in got.eigenvalues().iter().zip(&want) {
            assert!((a - b).abs() < 1e-10, "N={n} W={w}: {a} vs {b}");
        }
        assert!((got.sum() - n as f64).abs() < 1e-9);
    }
}

#[test]
fn constant_correlation_eigenvalues() {
    let m = Matrix::from_fn(4, |i, j| if i == j { 1.0 } else { 0.5 });
    let s = eigen_spectrum(&Covariance::from_matrix(m).unwrap()).unwrap();
    for (a, b) in s.eigenvalues().iter().zip([2.5, 0.5, 0.5, 0.5]) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn decomposition_reconstructs_input() {
    for (n, w, eta) in [(5, 2.0, 1.0), (20, 4.0, 1.0), (32, 8.0, 0.5)] {
        let cov = build_covariance(&geometry(n, w, eta));
        let eig = eigen_decompose(&cov).unwrap();
        let v = &eig.vectors;
        let lam = eig.spectrum.eigenvalues();
        let scaled = Matrix::from_fn(n, |i, j| v[(i, j)] * lam[j]);
        let back = scaled.matmul(&v.transpose()).unwrap();
        let rel = back.frobenius_distance(cov.entries()) / cov.entries().frobenius_norm();
        assert!(rel < 1e-9, "N={n}: {rel:e}");
    }
}

#[test]
fn asymmetric_input_rejected() {
    let m = Matrix::from_rows(&[vec![1.0, 0.2], vec![0.2 + 1e-9, 1.0]]).unwrap();
    match eigen_spectrum(&Covariance::from_matrix(m).unwrap()) {
        Err(Error::NotSymmetric { .. }) => {}
        other => panic!("expected NotSymmetric, got {other:?}"),
    }
}

#[test]
fn coloring_identity_and_rank_one() {
    let f = coloring_factor(&Covariance::from_matrix(Matrix::identity(3)).unwrap()).unwrap();
    assert!(f.frobenius_distance(&Matrix::identity(3)) < 1e-15);
    let ones = Matrix::from_fn(2, |_, _| 2.0);
    let f = coloring_factor(&Covariance::from_matrix(ones.clone()).unwrap()).unwrap();
    assert!(f[(0, 1)].abs() < 1e-15 && f[(1, 1)].abs() < 1e-15);
    assert!(f.matmul(&f.transpose()).unwrap().frobenius_distance(&ones) < 1e-14);
}

#[test]
fn coloring_reconstructs_jakes() {
    let cov = build_covariance(&geometry(20, 4.0, 1.0));
    let f = coloring_factor(&cov).unwrap();
    let back = f.matmul(&f.transpose()).unwrap();
    assert!(back.frobenius_distance(cov.entries()) / cov.entries().frobenius_norm() < 1e-9);
    for j in 0..20 {
        assert!(f[(0, j)] >= 0.0);
    }
}

#[test]
fn indefinite_matrix_rejected() {
    let m = Matrix::from_rows(&[vec![1.0, 1.2], vec![1.2, 1.0]]).unwrap();
    match coloring_factor(&Covariance::from_matrix(m).unwrap()) {
        Err(Error::NotPositiveSemidefinite { eigenvalue, .. }) => assert!((eigenvalue + 0.2).abs() < 1e-12),
        other => panic!("expected NotPositiveSemidefinite, got {other:?}"),
    }
}

#[test]
fn csv_round_trip() {
    let cov = build_covariance(&geometry(7, 2.5, 0.5));
    let back = Covariance::from_csv(&cov.to_csv()).unwrap();
    assert_eq!(back.entries().as_slice(), cov.entries().as_slice());
    assert_eq!(back.mean_gain(), 0.5);
}

#[test]
fn empirical_covariance_converges() {
    let n = 6;
    let eta = 1.0;
    let cov = build_covariance(&geometry(n, 2.0, eta));
    let f = coloring_factor(&cov).unwrap();
    let draws = 200_000;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut acc = vec![0.0; n * n];
    let mut z = vec![(0.0, 0.0); n];
    let mut g = vec![(0.0, 0.0); n];
    for _ in 0..draws {
        for v in z.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *v = (re * std::f64::consts::FRAC_1_SQRT_2, im * std::f64::consts::FRAC_1_SQRT_2);
        }
        for (k, gk) in g.iter_mut().enumerate() {
            *gk = f.row(k).iter().zip(&z).fold((0.0, 0.0), |(r, i), (c, (zr, zi))| (r + c * zr, i + c * zi));
        }
        for k in 0..n {
            for l in 0..n {
                // real part of g_k conj(g_l)
                acc[k * n + l] += g[k].0 * g[l].0 + g[k].1 * g[l].1;
            }
        }
    }
    let worst = (0..n * n)
        .map(|i| (acc[i] / draws as f64 - cov.entries().as_slice()[i]).abs())
        .fold(0.0, f64::max);
    assert!(worst < 0.02 * eta, "worst entry error {worst}");
}

proptest! {
    #[test]
    fn coefficient_depends_on_offset_only(n in 2usize..40, w in 0.1f64..10.0, k in 1usize..40, l in 1usize..40, shift in 0usize..40) {
        let g = geometry(n, w, 1.0);
        prop_assume!(k <= n && l <= n);
        let c = jakes_coefficient(k, l, &g).unwrap();
        prop_assert_eq!(c, jakes_coefficient(l, k, &g).unwrap());
        let (k2, l2) = (k + shift, l + shift);
        if k2 <= n && l2 <= n {
            prop_assert_eq!(c, jakes_coefficient(k2, l2, &g).unwrap());
        }
    }

    #[test]
    fn spectrum_sums_to_trace(n in 2usize..33, w in 0.2f64..10.0, eta in 0.1f64..3.0) {
        let cov = build_covariance(&geometry(n, w, eta));
        let s = eigen_spectrum(&cov).unwrap();
        prop_assert!((s.sum() - n as f64 * eta).abs() < 1e-9 * n as f64 * eta);
        prop_assert!(s.eigenvalues().windows(2).all(|p| p[0] >= p[1]));
        prop_assert!(s.eigenvalues().iter().all(|&v| v >= -1e-9 * eta));
    }
}
