//! Matrices of the harmonic-inversion method and their spectra.
//!
//! * `S_{mn} = c_{n-m}`: Hermitian Toeplitz overlap matrix, `S = P†P`.
//! * `U'_{mn} = c_{n-m+1}`: shifted (one-step evolution) matrix.
//! * `P_{kn} = √d_k exp(-i ω_k n δt)`: state matrix, `P = diag(√d) V`.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::{fmt_f64, AutocorrSeries, FrequencyModel, SamplingGrid};

pub type CMatrix = DMatrix<Complex64>;

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;
/// Relative Frobenius residual accepted from the Hermitian eigensolver.
pub const SPECTRUM_RESIDUAL_TOL: f64 = 1e-10;

/// `N×N` overlap matrix `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapMatrix(CMatrix);

/// `N×N` shifted matrix `U'`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedMatrix(CMatrix);

impl OverlapMatrix {
    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.0.diagonal().iter().map(|z| z.re).sum()
    }

    /// Wraps an arbitrary square matrix, checking it is Hermitian.
    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Precondition("overlap matrix must be square".into()));
        }
        let scale = m.norm().max(f64::MIN_POSITIVE);
        if (&m - m.adjoint()).norm() > 1e-12 * scale {
            return Err(Error::Precondition("matrix is not Hermitian".into()));
        }
        Ok(Self(m))
    }
}

impl ShiftedMatrix {
    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

/// Builds `S_{mn} = c_{n-m}` from an `N+1`-sample series.
///
/// The diagonal takes `Re c_0` so that `S` stays Hermitian when `c_0`
/// carries complex noise.
pub fn build_overlap(series: &AutocorrSeries) -> OverlapMatrix {
    let n = series.grid().n_steps();
    let c = series.values();
    let m = CMatrix::from_fn(n, n, |row, col| {
        if col > row {
            c[col - row]
        } else if col < row {
            c[row - col].conj()
        } else {
            Complex64::new(c[0].re, 0.0)
        }
    });
    OverlapMatrix(m)
}

/// Builds `U'_{mn} = c_{n-m+1}`; entries span `c_{-(N-2)}..=c_N`.
pub fn build_shifted(series: &AutocorrSeries) -> ShiftedMatrix {
    let n = series.grid().n_steps();
    let m = CMatrix::from_fn(n, n, |row, col| {
        let j = col as i64 - row as i64 + 1;
        series.value(j).expect("shift index within 0..=N")
    });
    ShiftedMatrix(m)
}

/// `K×N` state matrix together with its factors.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix {
    p: CMatrix,
    vandermonde: CMatrix,
    sqrt_amps: Vec<f64>,
}

impl StateMatrix {
    pub fn p(&self) -> &CMatrix {
        &self.p
    }

    /// Vandermonde factor `V_{kn} = exp(-i ω_k n δt)`.
    pub fn vandermonde(&self) -> &CMatrix {
        &self.vandermonde
    }

    /// Diagonal of the amplitude factor, `√d_k`.
    pub fn sqrt_amps(&self) -> &[f64] {
        &self.sqrt_amps
    }

    /// Singular values of `P`, descending; their squares are the nonzero
    /// eigenvalues of both `P†P = S` and `PP†`.
    pub fn singular_values(&self) -> Result<Vec<f64>> {
        singular_values(&self.p)
    }
}

pub(crate) fn vandermonde(omegas: &[f64], grid: &SamplingGrid) -> CMatrix {
    let dt = grid.delta_t();
    CMatrix::from_fn(omegas.len(), grid.n_steps(), |k, n| {
        Complex64::from_polar(1.0, -omegas[k] * n as f64 * dt)
    })
}

pub fn build_state_matrix(model: &FrequencyModel, grid: &SamplingGrid) -> StateMatrix {
    let vandermonde = vandermonde(model.omegas(), grid);
    let sqrt_amps: Vec<f64> = model.amps().iter().map(|d| d.sqrt()).collect();
    let mut p = vandermonde.clone();
    for (k, s) in sqrt_amps.iter().enumerate() {
        p.row_mut(k).scale_mut(*s);
    }
    StateMatrix {
        p,
        vandermonde,
        sqrt_amps,
    }
}

/// Singular values in descending order.
pub fn singular_values(m: &CMatrix) -> Result<Vec<f64>> {
    let svd = SVD::try_new(m.clone(), false, false, EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or(Error::NoConvergence("singular value decomposition"))?;
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    /// Real eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in eigenvalue order.
    pub eigenvectors: CMatrix,
}

impl SpectralData {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// `Q Λ Q†`.
    pub fn reconstruct(&self) -> CMatrix {
        let q = &self.eigenvectors;
        let mut scaled = q.clone();
        for (j, l) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*l);
        }
        scaled * q.adjoint()
    }
}

/// Eigenvalues sorted descending with phase-normalized eigenvectors.
///
/// Each eigenvector is rotated so that its first component of modulus
/// above `1e-8·max|v_i|` is real and positive.
pub fn hermitian_spectrum(s: &OverlapMatrix) -> Result<SpectralData> {
    hermitian_eigen(s.matrix())
}

pub(crate) fn hermitian_eigen(m: &CMatrix) -> Result<SpectralData> {
    let n = m.nrows();
    let eig = SymmetricEigen::try_new(m.clone(), EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or(Error::NoConvergence("Hermitian eigensolver"))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut eigenvectors = CMatrix::zeros(n, n);
    for (j, &i) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        let vmax = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if let Some(lead) = v.iter().find(|z| z.norm() > 1e-8 * vmax).copied() {
            let phase = lead.conj() / lead.norm();
            v.iter_mut().for_each(|z| *z *= phase);
        }
        eigenvectors.set_column(j, &v);
    }
    let spectrum = SpectralData {
        eigenvalues,
        eigenvectors,
    };

    let norm = m.norm();
    if (m - spectrum.reconstruct()).norm() > SPECTRUM_RESIDUAL_TOL * norm.max(f64::MIN_POSITIVE) {
        return Err(Error::NoConvergence(
            "Hermitian eigensolver residual above tolerance",
        ));
    }
    Ok(spectrum)
}

/// Gram matrix `VV†` with entries `Σ_{n<N} exp(-i (ω_j - ω_k) n δt)`.
pub fn vandermonde_gram(omegas: &[f64], grid: &SamplingGrid) -> CMatrix {
    let v = vandermonde(omegas, grid);
    &v * v.adjoint()
}

/// `det(VV†)` for the `K×N` Vandermonde factor.
///
/// Evaluated as `Π σ_i(V)²`: the singular values of `V` keep full relative
/// accuracy in the short-time limit where the determinant of the explicitly
/// formed Gram matrix is lost to cancellation. Coincident frequencies give
/// a determinant at rounding level.
pub fn vandermonde_gram_det_exact(omegas: &[f64], grid: &SamplingGrid) -> Result<f64> {
    let k = omegas.len();
    if k == 0 || grid.n_steps() < k {
        return Err(Error::Precondition(format!(
            "need 1 <= K <= N, got K = {k}, N = {}",
            grid.n_steps()
        )));
    }
    Ok(singular_values(&vandermonde(omegas, grid))?
        .iter()
        .map(|s| s * s)
        .product())
}

/// Natural log of the short-time approximation of `det(VV†)`:
///
/// `(N/K)^K Π_{j<K} ((N²-j²)/(K²-j²))^{K-j} δt^{K(K-1)} Π_{i<j} (ω_j-ω_i)²`.
pub fn ln_vandermonde_gram_det_approx(omegas: &[f64], grid: &SamplingGrid) -> Result<f64> {
    let k = omegas.len();
    let n = grid.n_steps();
    if k == 0 || n < k {
        return Err(Error::Precondition(format!(
            "need 1 <= K <= N, got K = {k}, N = {n}"
        )));
    }
    let (nf, kf) = (n as f64, k as f64);
    let mut ln = kf * (nf / kf).ln();
    for j in 1..k {
        let jf = j as f64;
        ln += (kf - jf) * ((nf * nf - jf * jf).ln() - (kf * kf - jf * jf).ln());
    }
    if k > 1 {
        ln += (kf * (kf - 1.0)) * grid.delta_t().ln();
    }
    for i in 0..k {
        for j in i + 1..k {
            ln += 2.0 * (omegas[j] - omegas[i]).abs().ln();
        }
    }
    Ok(ln)
}

/// Short-time approximation of `det(VV†)`; equals `N` for `K = 1`.
pub fn vandermonde_gram_det_approx(omegas: &[f64], grid: &SamplingGrid) -> Result<f64> {
    let ln = ln_vandermonde_gram_det_approx(omegas, grid)?;
    Ok(if omegas.len() == 1 {
        grid.n_steps() as f64
    } else {
        ln.exp()
    })
}

/// Dumps a matrix as `row,col,re,im` CSV.
pub fn write_matrix_csv<W: Write>(m: &CMatrix, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidConfig(format!("csv write: {e}"));
    w.write_record(["row", "col", "re", "im"]).map_err(io)?;
    for row in 0..m.nrows() {
        for col in 0..m.ncols() {
            let z = m[(row, col)];
            w.write_record([
                row.to_string(),
                col.to_string(),
                fmt_f64(z.re),
                fmt_f64(z.im),
            ])
            .map_err(io)?;
        }
    }
    w.flush()
        .map_err(|e| Error::InvalidConfig(format!("csv write: {e}")))
}
