#![allow(dead_code)]

use harmonic_certainty::{FrequencyModel, SamplingGrid};
use num_complex::Complex64;

pub fn model(omegas: &[f64], amps: &[f64]) -> FrequencyModel {
    FrequencyModel::new(omegas.to_vec(), amps.to_vec()).unwrap()
}

pub fn reference_model() -> FrequencyModel {
    model(&[0.0, 1.0], &[0.5, 0.5])
}

pub fn reference_grid() -> SamplingGrid {
    SamplingGrid::new(1e-3, 10).unwrap()
}

/// Eigenvalues (descending) of a Hermitian matrix given row-major, via
/// cyclic Jacobi rotations on the real symmetric embedding
/// `[[A, -B], [B, A]]`, whose spectrum is that of `A + iB` doubled.
#[allow(clippy::needless_range_loop)]
pub fn jacobi_hermitian_eigenvalues(h: &[Vec<Complex64>]) -> Vec<f64> {
    let n = h.len();
    let m = 2 * n;
    let mut a = vec![vec![0.0f64; m]; m];
    for i in 0..n {
        for j in 0..n {
            let z = h[i][j];
            a[i][j] = z.re;
            a[i + n][j + n] = z.re;
            a[i][j + n] = -z.im;
            a[i + n][j] = z.im;
        }
    }
    for _sweep in 0..100 {
        let off: f64 = (0..m)
            .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-300 {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..m {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..m {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..m).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev.chunks(2).map(|c| 0.5 * (c[0] + c[1])).collect()
}

/// `S_{mn} = Σ_k d_k exp(-i ω_k (n-m) δt)` written out directly.
pub fn overlap_direct(omegas: &[f64], amps: &[f64], dt: f64, n: usize) -> Vec<Vec<Complex64>> {
    (0..n)
        .map(|r| {
            (0..n)
                .map(|c| {
                    let lag = c as f64 - r as f64;
                    omegas
                        .iter()
                        .zip(amps)
                        .map(|(w, d)| Complex64::from_polar(*d, -w * lag * dt))
                        .sum()
                })
                .collect()
        })
        .collect()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
