//! Recovery of modes from a (noisy) autocorrelation series.
//!
//! Pipeline: spectrum of `S` → rank detection → truncation to the
//! dominant `K̂`-dimensional subspace → ordinary eigenproblem of
//! `D⁻¹ Q† U' Q` → frequencies from eigenvalue phases → populations by
//! least squares.

use nalgebra::{DVector, Schur, SVD};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{
    build_overlap, build_shifted, hermitian_spectrum, CMatrix, ShiftedMatrix, SpectralData,
};
use crate::signal::AutocorrSeries;

/// Relative rank floor used for noiseless input, `τ = 1e-10·Tr(S)`.
pub const EXACT_RANK_FLOOR: f64 = 1e-10;
/// Design matrices with `σ_min/σ_max` below this are treated as rank deficient.
const DESIGN_RCOND: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InversionConfig {
    /// Assumed noise ceiling `η_max`.
    pub eta_max: f64,
    /// Skip detection and keep this many modes.
    #[serde(default)]
    pub forced_rank: Option<usize>,
    /// Replace the default threshold `N·η_max`.
    #[serde(default)]
    pub rank_threshold: Option<f64>,
}

impl InversionConfig {
    pub fn new(eta_max: f64) -> Self {
        Self {
            eta_max,
            ..Self::default()
        }
    }

    pub fn with_forced_rank(mut self, k: usize) -> Self {
        self.forced_rank = Some(k);
        self
    }

    pub fn with_rank_threshold(mut self, tau: f64) -> Self {
        self.rank_threshold = Some(tau);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta_max.is_finite() && self.eta_max >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "eta_max must be non-negative, got {}",
                self.eta_max
            )));
        }
        if self.forced_rank.is_some() && self.rank_threshold.is_some() {
            return Err(Error::InvalidConfig(
                "forced_rank and rank_threshold are mutually exclusive".into(),
            ));
        }
        if self.forced_rank == Some(0) {
            return Err(Error::InvalidConfig("forced_rank must be positive".into()));
        }
        if let Some(t) = self.rank_threshold {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "rank_threshold must be non-negative, got {t}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionResult {
    #[serde(rename = "k_detected")]
    pub detected_rank: usize,
    /// Recovered frequencies, ascending.
    pub omegas: Vec<f64>,
    pub amps: Vec<f64>,
    /// `|μ_k|` for each recovered mode, in the order of `omegas`.
    pub eigen_moduli: Vec<f64>,
    /// RMS of `|c̃_n - Σ d̃_k exp(-i ω̃_k n δt)|` over `n = 0..=N`.
    pub residual: f64,
    /// Set when a negative least-squares population was clamped to zero.
    #[serde(default)]
    pub amps_clamped: bool,
}

/// Rank threshold `τ` applied by [`detect_rank`].
pub fn rank_threshold(spectrum: &SpectralData, eta_max: f64, n: usize) -> f64 {
    if eta_max > 0.0 {
        n as f64 * eta_max
    } else {
        EXACT_RANK_FLOOR * spectrum.trace()
    }
}

/// Counts eigenvalues strictly above `N·η_max` (or the relative floor for
/// noiseless input).
pub fn detect_rank(spectrum: &SpectralData, eta_max: f64, n: usize) -> Result<usize> {
    detect_rank_above(spectrum, rank_threshold(spectrum, eta_max, n))
}

/// Counts eigenvalues strictly above `threshold`.
pub fn detect_rank_above(spectrum: &SpectralData, threshold: f64) -> Result<usize> {
    let n = spectrum.dim();
    let k_hat = spectrum
        .eigenvalues
        .iter()
        .filter(|l| **l > threshold)
        .count();
    if k_hat == 0 || k_hat == n {
        return Err(Error::NoSpectralGap {
            k_hat,
            n,
            threshold,
        });
    }
    Ok(k_hat)
}

/// Dominant eigen-subspace of `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    /// `N×K̂`, orthonormal columns.
    pub q: CMatrix,
    /// Diagonal of `D = Q† S Q`.
    pub d: Vec<f64>,
}

impl Subspace {
    pub fn rank(&self) -> usize {
        self.d.len()
    }

    /// `Q D Q†`.
    pub fn reconstruct(&self) -> CMatrix {
        let mut scaled = self.q.clone();
        for (j, l) in self.d.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*l);
        }
        scaled * self.q.adjoint()
    }
}

pub fn truncate_subspace(spectrum: &SpectralData, k_hat: usize) -> Result<Subspace> {
    if k_hat == 0 || k_hat > spectrum.dim() {
        return Err(Error::Precondition(format!(
            "cannot keep {k_hat} of {} eigenvectors",
            spectrum.dim()
        )));
    }
    if let Some((index, &value)) = spectrum.eigenvalues[..k_hat]
        .iter()
        .enumerate()
        .find(|(_, l)| **l <= 0.0)
    {
        return Err(Error::NonPositiveEigenvalue { index, value });
    }
    Ok(Subspace {
        q: spectrum.eigenvectors.columns(0, k_hat).into_owned(),
        d: spectrum.eigenvalues[..k_hat].to_vec(),
    })
}

/// Eigenvalues `μ_k` of `D⁻¹ Q† U' Q`, unordered.
pub fn solve_reduced_eigenproblem(u: &ShiftedMatrix, sub: &Subspace) -> Result<Vec<Complex64>> {
    if u.dim() != sub.q.nrows() {
        return Err(Error::Precondition(format!(
            "U' is {}×{} but Q has {} rows",
            u.dim(),
            u.dim(),
            sub.q.nrows()
        )));
    }
    if sub.d.contains(&0.0) {
        return Err(Error::Singular("D has a zero diagonal entry".into()));
    }
    let mut reduced = sub.q.adjoint() * u.matrix() * &sub.q;
    for (i, l) in sub.d.iter().enumerate() {
        reduced.row_mut(i).scale_mut(1.0 / l);
    }
    if reduced.nrows() == 1 {
        return Ok(vec![reduced[(0, 0)]]);
    }
    let schur = Schur::try_new(reduced, 1e-15, 10_000)
        .ok_or(Error::NoConvergence("reduced non-Hermitian eigenproblem"))?;
    let (_, t) = schur.unpack();
    Ok(t.diagonal().iter().copied().collect())
}

/// `ω̃ = -arg(μ)/δt` with `arg ∈ (-π, π]`, sorted ascending.
///
/// Frequencies are recovered modulo `2π/δt`; anything with `|ω δt| > π`
/// comes back as its alias on the principal branch.
pub fn extract_frequencies(mus: &[Complex64], delta_t: f64) -> Vec<f64> {
    let mut omegas: Vec<f64> = mus.iter().map(|mu| mode_frequency(*mu, delta_t)).collect();
    omegas.sort_by(f64::total_cmp);
    omegas
}

fn mode_frequency(mu: Complex64, delta_t: f64) -> f64 {
    let mut arg = mu.arg();
    if arg == -std::f64::consts::PI {
        arg = std::f64::consts::PI;
    }
    -arg / delta_t
}

/// Least-squares populations for known frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeFit {
    pub amps: Vec<f64>,
    pub clamped: bool,
    pub residual: f64,
}

/// Fits `c̃_n ≈ Σ_k d̃_k exp(-i ω̃_k n δt)` over `n = 0..=N` in the complex
/// field, keeps the real parts and clamps negatives to zero.
pub fn recover_amplitudes(series: &AutocorrSeries, omegas: &[f64]) -> Result<AmplitudeFit> {
    if omegas.is_empty() {
        return Err(Error::Precondition("no frequencies supplied".into()));
    }
    let mut sorted = omegas.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::RankDeficient("duplicate frequency estimates".into()));
    }
    let design = design_matrix(series, omegas);
    let rhs = DVector::from_column_slice(series.values());

    let svd = SVD::try_new(design.clone(), true, true, 1e-15, 10_000)
        .ok_or(Error::NoConvergence("amplitude least squares"))?;
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin.is_nan() || smin <= DESIGN_RCOND * smax {
        return Err(Error::RankDeficient(format!(
            "design matrix condition {:e} exceeds {:e}",
            smax / smin,
            1.0 / DESIGN_RCOND
        )));
    }
    let solution = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::RankDeficient(e.to_string()))?;

    let mut clamped = false;
    let amps: Vec<f64> = solution
        .iter()
        .map(|z| {
            if z.re < 0.0 {
                clamped = true;
                0.0
            } else {
                z.re
            }
        })
        .collect();
    let residual = rms_residual(series, omegas, &amps);
    Ok(AmplitudeFit {
        amps,
        clamped,
        residual,
    })
}

fn design_matrix(series: &AutocorrSeries, omegas: &[f64]) -> CMatrix {
    let grid = series.grid();
    CMatrix::from_fn(grid.n_samples(), omegas.len(), |n, k| {
        Complex64::from_polar(1.0, -omegas[k] * grid.time(n))
    })
}

fn rms_residual(series: &AutocorrSeries, omegas: &[f64], amps: &[f64]) -> f64 {
    let grid = series.grid();
    let sq: f64 = series
        .values()
        .iter()
        .enumerate()
        .map(|(n, c)| {
            let t = grid.time(n);
            let fit: Complex64 = omegas
                .iter()
                .zip(amps)
                .map(|(w, d)| Complex64::from_polar(*d, -w * t))
                .sum();
            (c - fit).norm_sqr()
        })
        .sum();
    (sq / grid.n_samples() as f64).sqrt()
}

/// Runs the full inversion pipeline.
pub fn harmonic_invert(
    series: &AutocorrSeries,
    config: &InversionConfig,
) -> Result<InversionResult> {
    config.validate()?;
    let n = series.grid().n_steps();
    let s = build_overlap(series);
    let spectrum = hermitian_spectrum(&s).map_err(|e| e.at("overlap spectrum"))?;

    let k_hat = match (config.forced_rank, config.rank_threshold) {
        (Some(k), _) if k > n => {
            return Err(Error::InvalidConfig(format!(
                "forced_rank {k} exceeds N = {n}"
            )))
        }
        (Some(k), _) => Ok(k),
        (None, Some(tau)) => detect_rank_above(&spectrum, tau),
        (None, None) => detect_rank(&spectrum, config.eta_max, n),
    }
    .map_err(|e| e.at("rank detection"))?;

    let sub = truncate_subspace(&spectrum, k_hat).map_err(|e| e.at("truncation"))?;
    let u = build_shifted(series);
    let mus = solve_reduced_eigenproblem(&u, &sub).map_err(|e| e.at("reduced eigenproblem"))?;

    let dt = series.grid().delta_t();
    let mut modes: Vec<(f64, f64)> = mus
        .iter()
        .map(|mu| (mode_frequency(*mu, dt), mu.norm()))
        .collect();
    modes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (omegas, eigen_moduli): (Vec<f64>, Vec<f64>) = modes.into_iter().unzip();

    let fit = recover_amplitudes(series, &omegas).map_err(|e| e.at("amplitude recovery"))?;
    if fit.clamped {
        log::warn!("negative least-squares population clamped to zero");
    }
    Ok(InversionResult {
        detected_rank: k_hat,
        omegas,
        amps: fit.amps,
        eigen_moduli,
        residual: fit.residual,
        amps_clamped: fit.clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{synthesize_autocorrelation, FrequencyModel, SamplingGrid};
    use std::f64::consts::PI;

    fn exact(omegas: &[f64], amps: &[f64], dt: f64, n: usize) -> AutocorrSeries {
        let model = FrequencyModel::new(omegas.to_vec(), amps.to_vec()).unwrap();
        synthesize_autocorrelation(&model, &SamplingGrid::new(dt, n).unwrap()).unwrap()
    }

    fn spectrum_of(series: &AutocorrSeries) -> SpectralData {
        hermitian_spectrum(&build_overlap(series)).unwrap()
    }

    #[test]
    fn exact_rank_is_mode_count() {
        let s = exact(&[1.0, 2.0, 3.5], &[0.2, 0.5, 0.3], 0.1, 12);
        assert_eq!(detect_rank(&spectrum_of(&s), 0.0, 12).unwrap(), 3);
    }

    #[test]
    fn single_mode_rank_under_noise() {
        let s = exact(&[0.8], &[1.0], 0.1, 8);
        assert_eq!(detect_rank(&spectrum_of(&s), 1e-3, 8).unwrap(), 1);
    }

    #[test]
    fn no_gap_is_an_error() {
        let s = exact(&[0.0, 2.0], &[0.5, 0.5], 0.5, 2);
        let err = detect_rank(&spectrum_of(&s), 0.0, 2).unwrap_err();
        assert!(matches!(err, Error::NoSpectralGap { k_hat: 2, n: 2, .. }));
        let err = detect_rank_above(&spectrum_of(&s), 10.0).unwrap_err();
        assert!(matches!(err, Error::NoSpectralGap { k_hat: 0, .. }));
    }

    #[test]
    fn full_truncation_keeps_everything() {
        let s = exact(&[0.0, 1.0], &[0.5, 0.5], 0.3, 2);
        let spec = spectrum_of(&s);
        let sub = truncate_subspace(&spec, 2).unwrap();
        assert_eq!(sub.d, spec.eigenvalues);
        let q = &sub.q;
        assert!((q.adjoint() * q - CMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn rank_two_reconstruction_is_exact() {
        let s = exact(&[0.0, 1.0], &[0.5, 0.5], 1e-3, 10);
        let spec = spectrum_of(&s);
        let sub = truncate_subspace(&spec, 2).unwrap();
        let overlap = build_overlap(&s);
        let norm = overlap.matrix().norm();
        assert!((overlap.matrix() - sub.reconstruct()).norm() <= 1e-10 * norm);
        assert!((sub.q.adjoint() * &sub.q - CMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn rank_one_truncation_error_is_second_eigenvalue() {
        let s = exact(&[0.0, 1.0], &[0.5, 0.5], 0.1, 10);
        let spec = spectrum_of(&s);
        let sub = truncate_subspace(&spec, 1).unwrap();
        let err = (build_overlap(&s).matrix() - sub.reconstruct()).norm();
        assert!((err - spec.eigenvalues[1]).abs() < 1e-10 * spec.eigenvalues[1]);
    }

    #[test]
    fn truncation_rejects_non_positive() {
        let spec = SpectralData {
            eigenvalues: vec![1.0, -1e-3],
            eigenvectors: CMatrix::identity(2, 2),
        };
        assert!(matches!(
            truncate_subspace(&spec, 2),
            Err(Error::NonPositiveEigenvalue { index: 1, .. })
        ));
    }

    #[test]
    fn single_mode_eigenvalue() {
        let (w, dt) = (1.7, 0.05);
        let s = exact(&[w], &[1.0], dt, 5);
        let sub = truncate_subspace(&spectrum_of(&s), 1).unwrap();
        let mus = solve_reduced_eigenproblem(&build_shifted(&s), &sub).unwrap();
        assert_eq!(mus.len(), 1);
        assert!((mus[0] - Complex64::from_polar(1.0, -w * dt)).norm() < 1e-12);
    }

    #[test]
    fn three_mode_eigenvalues_match_phasors() {
        let omegas = [1.0, 2.0, 3.5];
        let dt = 0.1;
        let s = exact(&omegas, &[0.2, 0.5, 0.3], dt, 12);
        let sub = truncate_subspace(&spectrum_of(&s), 3).unwrap();
        let mus = solve_reduced_eigenproblem(&build_shifted(&s), &sub).unwrap();
        for w in omegas {
            let target = Complex64::from_polar(1.0, -w * dt);
            let best = mus
                .iter()
                .map(|m| (m - target).norm())
                .fold(f64::MAX, f64::min);
            assert!(best < 1e-10, "{best}");
        }
        assert!(mus.iter().all(|m| (m.norm() - 1.0).abs() <= 1e-10));
    }

    #[test]
    fn phase_extraction_conventions() {
        assert_eq!(
            extract_frequencies(&[Complex64::new(1.0, 0.0)], 0.3),
            vec![0.0]
        );
        let w = extract_frequencies(&[Complex64::from_polar(1.0, -0.05)], 0.1);
        assert!((w[0] - 0.5).abs() < 1e-14);
        let dt = 0.01;
        let omega = 0.9 * 2.0 * PI / dt;
        let w = extract_frequencies(&[Complex64::from_polar(1.0, -omega * dt)], dt);
        assert!((w[0] + 0.1 * 2.0 * PI / dt).abs() < 1e-9);
        // arg = -π maps to +π
        let w = extract_frequencies(&[Complex64::new(-1.0, -0.0)], 1.0);
        assert_eq!(w[0], -PI);
        let w = extract_frequencies(
            &[
                Complex64::from_polar(1.0, 0.2),
                Complex64::from_polar(1.0, -0.3),
            ],
            1.0,
        );
        assert_eq!(w.len(), 2);
        assert!(w[0] < w[1]);
    }

    #[test]
    fn amplitudes_from_true_frequencies() {
        let s = exact(&[0.0, 1.0], &[0.3, 0.7], 0.2, 10);
        let fit = recover_amplitudes(&s, &[0.0, 1.0]).unwrap();
        assert!((fit.amps[0] - 0.3).abs() < 1e-10);
        assert!((fit.amps[1] - 0.7).abs() < 1e-10);
        assert!(!fit.clamped);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn single_mode_amplitude_is_projected_mean() {
        let s = exact(&[1.1], &[0.9], 0.1, 6);
        let noisy = crate::signal::apply_noise(
            &s,
            &crate::signal::NoiseSpec::new(1e-2, crate::signal::NoiseKind::UniformDisk, 5),
        )
        .unwrap();
        let w = 1.1;
        let fit = recover_amplitudes(&noisy, &[w]).unwrap();
        let mean: Complex64 = noisy
            .values()
            .iter()
            .enumerate()
            .map(|(n, c)| c * Complex64::from_polar(1.0, w * 0.1 * n as f64))
            .sum::<Complex64>()
            / 7.0;
        assert!((fit.amps[0] - mean.re).abs() < 1e-12);
    }

    #[test]
    fn duplicate_frequencies_rejected() {
        let s = exact(&[0.0, 1.0], &[0.5, 0.5], 0.1, 6);
        assert!(matches!(
            recover_amplitudes(&s, &[0.5, 0.5]),
            Err(Error::RankDeficient(_))
        ));
    }

    #[test]
    fn negative_amplitude_is_clamped() {
        let s = exact(&[0.0, 1.0], &[0.5, 0.5], 0.1, 6);
        let fit = recover_amplitudes(&s, &[0.0, 1.0, 2.0]).unwrap();
        assert!(fit.amps.iter().all(|d| *d >= 0.0));
    }

    #[test]
    fn end_to_end_three_modes() {
        let s = exact(&[1.0, 2.0, 3.5], &[0.2, 0.5, 0.3], 0.1, 12);
        let r = harmonic_invert(&s, &InversionConfig::new(0.0)).unwrap();
        assert_eq!(r.detected_rank, 3);
        for (got, want) in r.omegas.iter().zip([1.0, 2.0, 3.5]) {
            assert!((got - want).abs() <= 1e-6 * want);
        }
        for (got, want) in r.amps.iter().zip([0.2, 0.5, 0.3]) {
            assert!((got - want).abs() <= 1e-6);
        }
        assert!(r.residual <= 1e-8);
    }

    #[test]
    fn end_to_end_short_time() {
        let s = exact(&[0.0, 1.0], &[0.5, 0.5], 1e-3, 10);
        let r = harmonic_invert(&s, &InversionConfig::new(0.0).with_forced_rank(2)).unwrap();
        assert!((r.omegas[0] - 0.0).abs() < 1e-4, "{:?}", r.omegas);
        assert!((r.omegas[1] - 1.0).abs() < 1e-4, "{:?}", r.omegas);
    }

    #[test]
    fn stage_labels_propagate() {
        let s = exact(&[0.0, 2.0], &[0.5, 0.5], 0.5, 2);
        let err = harmonic_invert(&s, &InversionConfig::new(0.0)).unwrap_err();
        assert!(err.to_string().starts_with("rank detection"));
        assert!(matches!(err.root(), Error::NoSpectralGap { .. }));
    }

    #[test]
    fn config_validation() {
        let both = InversionConfig {
            eta_max: 0.0,
            forced_rank: Some(2),
            rank_threshold: Some(1e-3),
        };
        assert!(both.validate().is_err());
        assert!(InversionConfig::new(-1.0).validate().is_err());
        let s = exact(&[0.0, 1.0], &[0.5, 0.5], 0.1, 4);
        assert!(harmonic_invert(&s, &InversionConfig::new(0.0).with_forced_rank(5)).is_err());
    }

    #[test]
    fn result_json_schema() {
        let s = exact(&[0.5], &[1.0], 0.1, 4);
        let r = harmonic_invert(&s, &InversionConfig::new(0.0)).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for key in ["k_detected", "omegas", "amps", "eigen_moduli", "residual"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }
}
