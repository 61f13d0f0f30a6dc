//! Library results against independent reference computations.
//!
//! Frozen high-precision values come from `oracle/reference_values.py`.

#![allow(clippy::excessive_precision)]

mod common;

use common::*;
use harmonic_certainty::bounds::{
    certainty_bound, exact_eigen, lambda_min_analytic, lambda_min_two_mode, ln_lambda_min_general,
    BoundInput, LambdaSource,
};
use harmonic_certainty::matrix::{
    build_overlap, hermitian_spectrum, vandermonde_gram_det_approx, vandermonde_gram_det_exact,
};
use harmonic_certainty::{
    apply_noise, synthesize_autocorrelation, NoiseKind, NoiseSpec, SamplingGrid,
};

const REF_LAMBDA_1: f64 = 9.9999793750251796731;
const REF_LAMBDA_MIN: f64 = 2.0624974820326941076e-5;
const REF_BOUND_TOTAL: f64 = 742.73269220569152635;
const REF_BOUND_PER_STEP: f64 = 74.27319262631428387;
const K3_LAMBDAS: [f64; 3] = [
    10.93719225932708026,
    1.0453662418398759587,
    0.017441498833043781528,
];
const GRAM_K3_N6: f64 = 5.6447959755277682186e-17;
const GRAM_K4_N8: f64 = 7.2455140976219267392e-35;

#[test]
fn reference_scenario_eigenvalues_match_high_precision() {
    let e = exact_eigen(&reference_model(), &reference_grid()).unwrap();
    assert!(rel(e.lambda_min, REF_LAMBDA_MIN) < 1e-8, "{}", e.lambda_min);
    assert!(rel(e.lambda_1, REF_LAMBDA_1) < 1e-12);
    assert_eq!(e.trace, 10.0);
}

#[test]
fn reference_scenario_bound_matches_high_precision() {
    let (m, g) = (reference_model(), reference_grid());
    let b = certainty_bound(
        BoundInput::Model {
            model: &m,
            grid: &g,
        },
        1e-7,
        LambdaSource::Exact,
    )
    .unwrap();
    assert!(
        rel(b.bound_total, REF_BOUND_TOTAL) < 1e-7,
        "{}",
        b.bound_total
    );
    assert!(
        rel(b.bound_per_step, REF_BOUND_PER_STEP) < 1e-7,
        "{}",
        b.bound_per_step
    );
    assert!(b.admissible);
    assert!(rel(b.admissible_eta_limit(), REF_LAMBDA_MIN / 20.0) < 1e-8);
}

#[test]
fn three_mode_spectrum_matches_high_precision_and_jacobi() {
    let (w, d) = ([1.0, 2.0, 3.5], [0.2, 0.5, 0.3]);
    let grid = SamplingGrid::new(0.1, 12).unwrap();
    let series = synthesize_autocorrelation(&model(&w, &d), &grid).unwrap();
    let spectrum = hermitian_spectrum(&build_overlap(&series)).unwrap();
    let jacobi = jacobi_hermitian_eigenvalues(&overlap_direct(&w, &d, 0.1, 12));
    for i in 0..3 {
        assert!(rel(spectrum.eigenvalues[i], K3_LAMBDAS[i]) < 1e-11);
        assert!(rel(jacobi[i], K3_LAMBDAS[i]) < 1e-11);
    }
    for (a, b) in spectrum.eigenvalues[3..].iter().zip(&jacobi[3..]) {
        assert!(a.abs() < 1e-13 && b.abs() < 1e-13);
    }
    let e = exact_eigen(&model(&w, &d), &grid).unwrap();
    assert!(rel(e.lambda_min, K3_LAMBDAS[2]) < 1e-11);
}

#[test]
fn noisy_spectrum_matches_jacobi() {
    let (w, d) = ([0.3, 1.1, 2.0], [0.4, 0.35, 0.25]);
    let grid = SamplingGrid::new(0.2, 9).unwrap();
    let exact = synthesize_autocorrelation(&model(&w, &d), &grid).unwrap();
    let noisy = apply_noise(&exact, &NoiseSpec::new(1e-3, NoiseKind::UniformDisk, 11)).unwrap();
    let s = build_overlap(&noisy);
    let rows: Vec<Vec<_>> = (0..9)
        .map(|r| (0..9).map(|c| s.matrix()[(r, c)]).collect())
        .collect();
    let jacobi = jacobi_hermitian_eigenvalues(&rows);
    let spectrum = hermitian_spectrum(&s).unwrap();
    for (a, b) in spectrum.eigenvalues.iter().zip(&jacobi) {
        assert!((a - b).abs() < 1e-12 * s.trace(), "{a} vs {b}");
    }
}

/// `det(VV†) = N² - sin²(NΔωδt/2)/sin²(Δωδt/2)` for two modes.
fn gram_two_mode(dw: f64, dt: f64, n: usize) -> f64 {
    let nf = n as f64;
    let x = dw * dt / 2.0;
    nf * nf - ((nf * x).sin() / x.sin()).powi(2)
}

#[test]
fn two_mode_gram_determinant_closed_form() {
    for &n in &[2usize, 3, 5, 10, 17] {
        for &x in &[0.05, 0.1, 0.3, 0.7, 1.3] {
            let grid = SamplingGrid::new(x, n).unwrap();
            let exact = vandermonde_gram_det_exact(&[0.0, 1.0], &grid).unwrap();
            assert!(rel(exact, gram_two_mode(1.0, x, n)) < 1e-10, "N={n} x={x}");
        }
    }
}

#[test]
fn small_step_two_mode_gram_is_six_x_squared() {
    let grid = SamplingGrid::new(1e-4, 3).unwrap();
    let exact = vandermonde_gram_det_exact(&[0.0, 1.0], &grid).unwrap();
    assert!(rel(exact, 6e-8) < 1e-4);
    let approx = vandermonde_gram_det_approx(&[0.0, 1.0], &grid).unwrap();
    assert!(rel(approx, 6e-8) < 1e-12);
}

#[test]
fn gram_determinants_match_high_precision() {
    let g = SamplingGrid::new(1e-3, 6).unwrap();
    let exact = vandermonde_gram_det_exact(&[0.0, 0.6, 1.0], &g).unwrap();
    assert!(rel(exact, GRAM_K3_N6) < 1e-6, "{exact}");
    let g = SamplingGrid::new(1e-3, 8).unwrap();
    let exact = vandermonde_gram_det_exact(&[0.0, 0.3, 0.7, 1.0], &g).unwrap();
    assert!(rel(exact, GRAM_K4_N8) < 1e-4, "{exact}");
}

#[test]
fn analytic_lambda_reference_value() {
    let (m, g) = (reference_model(), reference_grid());
    // (N - 1/N)/12 · Δω²/(1/d₁ + 1/d₂) · (Nδt)² = 9.9/12 · 0.25 · 1e-4
    let expected = 9.9 / 12.0 * 0.25 * 1e-4;
    assert!(rel(lambda_min_two_mode(&m, &g).unwrap(), expected) < 1e-14);
    assert!(rel(ln_lambda_min_general(&m, &g).unwrap().exp(), expected) < 1e-13);
    let a = lambda_min_analytic(&m, &g).unwrap().value();
    assert!(rel(a, REF_LAMBDA_MIN) < 1e-4);
}
