//! Error analysis of the inversion: conditioning of the state matrix, the
//! smallest positive eigenvalue of `S`, the effective frequency distance
//! and the resulting upper bounds on frequency error.
//!
//! With `λ_min` the smallest positive eigenvalue of `S` and `κ(P) =
//! √(λ_1/λ_min)`, the per-step bound is
//!
//! ```text
//! |ω̃ - ω| δt <= κ(P) K (N+1) η_max / λ_min
//! ```
//!
//! and, using `λ_1 <= Tr(S)`, the total-time bound is
//!
//! ```text
//! |ω̃ - ω| T <= K N (N+1) √Tr(S) η_max / λ_min^{3/2}
//! ```

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::inversion::detect_rank;
use crate::matrix::{build_overlap, build_state_matrix, hermitian_spectrum, singular_values};
use crate::signal::{AutocorrSeries, FrequencyModel, SamplingGrid};

/// `T·Δω_max` above which the short-time formulas are flagged.
pub const SHORT_TIME_ADVISORY: f64 = 0.1;

fn ln_factorial(n: usize) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// `ln(d_k Π_{j≠k} (ω_k - ω_j)²)` for each mode.
fn ln_mode_weights(model: &FrequencyModel) -> Result<Vec<f64>> {
    let w = model.omegas();
    (0..model.k())
        .map(|k| {
            let mut ln = model.amps()[k].ln();
            for j in (0..model.k()).filter(|&j| j != k) {
                let gap = (w[k] - w[j]).abs();
                if gap == 0.0 {
                    return Err(Error::Singular("coincident frequencies".into()));
                }
                ln += 2.0 * gap.ln();
            }
            Ok(ln)
        })
        .collect()
}

fn require_multi_mode(model: &FrequencyModel, grid: &SamplingGrid) -> Result<()> {
    if model.k() < 2 {
        return Err(Error::Precondition(
            "needs K >= 2; for K = 1 the only eigenvalue is N·d_1".into(),
        ));
    }
    if grid.n_steps() < model.k() {
        return Err(Error::Precondition(format!(
            "N = {} is smaller than K = {}",
            grid.n_steps(),
            model.k()
        )));
    }
    Ok(())
}

/// Largest and smallest positive eigenvalues of `S` with its trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactEigen {
    pub lambda_1: f64,
    pub lambda_min: f64,
    pub trace: f64,
}

/// Extremal nonzero eigenvalues of `S = P†P` for a noiseless model.
///
/// Taken as squared singular values of the `K×N` state matrix rather than
/// from an eigensolve of `S` itself: in the short-time regime `λ_min`
/// drops below `1e-16·Tr(S)` and is only resolved through `P`.
pub fn exact_eigen(model: &FrequencyModel, grid: &SamplingGrid) -> Result<ExactEigen> {
    if grid.n_steps() < model.k() {
        return Err(Error::Precondition(format!(
            "N = {} is smaller than K = {}",
            grid.n_steps(),
            model.k()
        )));
    }
    let sv = build_state_matrix(model, grid).singular_values()?;
    Ok(ExactEigen {
        lambda_1: sv[0] * sv[0],
        lambda_min: sv[sv.len() - 1] * sv[sv.len() - 1],
        trace: grid.n_steps() as f64 * model.amp_sum(),
    })
}

/// Same quantities read off the spectrum of the sampled `S`, keeping `k`
/// modes.
pub fn spectrum_eigen(series: &AutocorrSeries, k: usize) -> Result<ExactEigen> {
    let s = build_overlap(series);
    let spectrum = hermitian_spectrum(&s)?;
    if k == 0 || k > spectrum.dim() {
        return Err(Error::Precondition(format!(
            "cannot take {k} eigenvalues of a {}×{} matrix",
            spectrum.dim(),
            spectrum.dim()
        )));
    }
    Ok(ExactEigen {
        lambda_1: spectrum.eigenvalues[0],
        lambda_min: spectrum.eigenvalues[k - 1],
        trace: s.trace(),
    })
}

/// `κ(P)` and its trace-based ceiling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conditioning {
    pub kappa: f64,
    pub kappa_upper: f64,
}

/// `κ = √(λ_1/λ_min)`, `κ_upper = √(Tr(S)/λ_min)`.
pub fn condition_number(lambda_1: f64, lambda_min: f64, trace: f64) -> Result<Conditioning> {
    if lambda_min.is_nan() || lambda_min <= 0.0 {
        return Err(Error::NonPositiveEigenvalue {
            index: 0,
            value: lambda_min,
        });
    }
    Ok(Conditioning {
        kappa: (lambda_1 / lambda_min).sqrt(),
        kappa_upper: (trace / lambda_min).sqrt(),
    })
}

pub fn condition_number_of_model(
    model: &FrequencyModel,
    grid: &SamplingGrid,
) -> Result<Conditioning> {
    let e = exact_eigen(model, grid)?;
    condition_number(e.lambda_1, e.lambda_min, e.trace)
}

/// Both closed forms for `λ_min` in the short-time regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticLambda {
    /// General-`K` expression.
    pub general: f64,
    /// Dedicated two-mode expression, `K = 2` only.
    pub two_mode: Option<f64>,
}

impl AnalyticLambda {
    /// The form appropriate to `K`.
    pub fn value(&self) -> f64 {
        self.two_mode.unwrap_or(self.general)
    }
}

/// `ln λ_min` from the general-`K` expression
///
/// `(N+K-1)! / ((N-K)! (2K-1)) · [(K-1)!/(2K-2)!]² · δt^{2(K-1)} /
///  Σ_k [d_k Π_{j≠k} (ω_k-ω_j)²]⁻¹`.
pub fn ln_lambda_min_general(model: &FrequencyModel, grid: &SamplingGrid) -> Result<f64> {
    require_multi_mode(model, grid)?;
    let (k, n) = (model.k(), grid.n_steps());
    let prefactor = ln_factorial(n + k - 1) - ln_factorial(n - k) - ((2 * k - 1) as f64).ln()
        + 2.0 * (ln_factorial(k - 1) - ln_factorial(2 * k - 2));
    let inverse_weights: Vec<f64> = ln_mode_weights(model)?.iter().map(|w| -w).collect();
    Ok(prefactor + 2.0 * (k - 1) as f64 * grid.delta_t().ln() - log_sum_exp(&inverse_weights))
}

/// `(N - 1/N)/12 · (ω_1-ω_2)² / (1/d_1 + 1/d_2) · (N δt)²`.
pub fn lambda_min_two_mode(model: &FrequencyModel, grid: &SamplingGrid) -> Result<f64> {
    require_multi_mode(model, grid)?;
    if model.k() != 2 {
        return Err(Error::Precondition(format!(
            "two-mode formula needs K = 2, got {}",
            model.k()
        )));
    }
    let n = grid.n_steps() as f64;
    let (w, d) = (model.omegas(), model.amps());
    let gap = w[0] - w[1];
    Ok((n - 1.0 / n) / 12.0 * gap * gap / (1.0 / d[0] + 1.0 / d[1]) * (n * grid.delta_t()).powi(2))
}

/// Short-time estimate of `λ_min` for `K >= 2`.
pub fn lambda_min_analytic(model: &FrequencyModel, grid: &SamplingGrid) -> Result<AnalyticLambda> {
    require_multi_mode(model, grid)?;
    if !grid.is_short_time(model, SHORT_TIME_ADVISORY) {
        log::warn!(
            "T·Δω_max = {:.3} is outside the short-time regime; analytic λ_min is unreliable",
            grid.total_time() * model.max_gap()
        );
    }
    let general = ln_lambda_min_general(model, grid)?.exp();
    let two_mode = if model.k() == 2 {
        Some(lambda_min_two_mode(model, grid)?)
    } else {
        None
    };
    Ok(AnalyticLambda { general, two_mode })
}

/// `λ_min ≈ -a_0/a_1 = det(PP†) / Σ_k Minor_kk(PP†)` from the
/// characteristic polynomial of `PP†`.
///
/// Each principal minor of `PP†` is the Gram determinant of `P` with row
/// `k` removed; determinants are products of squared singular values.
pub fn lambda_min_char_poly_estimate(model: &FrequencyModel, grid: &SamplingGrid) -> Result<f64> {
    require_multi_mode(model, grid)?;
    let p = build_state_matrix(model, grid).p().clone();
    let gram_det = |m: &crate::matrix::CMatrix| -> Result<f64> {
        Ok(singular_values(m)?.iter().map(|s| s * s).product())
    };
    let a0 = gram_det(&p)?;
    let mut minors = 0.0;
    for k in 0..model.k() {
        minors += gram_det(&p.clone().remove_row(k))?;
    }
    let estimate = a0 / minors;
    if !(estimate.is_finite() && estimate > 0.0) {
        return Err(Error::Singular(format!(
            "PP† is singular (det {a0:e}, minor sum {minors:e})"
        )));
    }
    Ok(estimate)
}

/// Effective frequency distance `Δ`.
///
/// `K = 2`: `1/Δ² = (1/2) / (d_1 d_2 (ω_1-ω_2)²)`.
/// `K > 2`: `1/Δ^{2(K-1)} = (1/K) Σ_k (Σ_j d_j) / (d_k Π_{j≠k} (ω_k-ω_j)²)`.
pub fn effective_delta(model: &FrequencyModel) -> Result<f64> {
    let k = model.k();
    if k < 2 {
        return Err(Error::Precondition("Δ needs at least two modes".into()));
    }
    if k == 2 {
        let (w, d) = (model.omegas(), model.amps());
        let gap = (w[0] - w[1]).abs();
        if gap == 0.0 {
            return Err(Error::Singular("coincident frequencies".into()));
        }
        return Ok((2.0 * d[0] * d[1]).sqrt() * gap);
    }
    let inverse: Vec<f64> = ln_mode_weights(model)?.iter().map(|w| -w).collect();
    let ln_inv = model.amp_sum().ln() - (k as f64).ln() + log_sum_exp(&inverse);
    Ok((-ln_inv / (2 * (k - 1)) as f64).exp())
}

/// Which `λ_min` feeds the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaSource {
    #[default]
    Exact,
    Analytic,
}

/// Where the ingredients of a bound come from.
#[derive(Debug, Clone, Copy)]
pub enum BoundInput<'a> {
    /// Ground-truth model on a grid.
    Model {
        model: &'a FrequencyModel,
        grid: &'a SamplingGrid,
    },
    /// Sampled series; `k` modes kept, or detected from the series' own
    /// noise ceiling when `None`.
    Series {
        series: &'a AutocorrSeries,
        k: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertaintyBound {
    pub k: usize,
    pub n_steps: usize,
    pub lambda_source: LambdaSource,
    pub lambda_min_exact: f64,
    /// Unavailable when only a series is known.
    pub lambda_min_analytic: Option<f64>,
    pub lambda_1: f64,
    pub trace_s: f64,
    pub kappa: f64,
    pub kappa_upper: f64,
    /// Unavailable for a single mode or when only a series is known.
    pub delta_eff: Option<f64>,
    /// Bounds `|ω̃ - ω| δt`.
    pub bound_per_step: f64,
    /// Bounds `|ω̃ - ω| T`.
    pub bound_total: f64,
    pub eta_max: f64,
    pub admissible: bool,
}

impl CertaintyBound {
    /// `λ_min` actually used for `κ` and the bounds.
    pub fn lambda_min_used(&self) -> f64 {
        match self.lambda_source {
            LambdaSource::Exact => self.lambda_min_exact,
            LambdaSource::Analytic => self
                .lambda_min_analytic
                .expect("analytic source requires an analytic value"),
        }
    }

    /// Largest `η_max` satisfying the rank-detection condition,
    /// `λ_min/(2N)`.
    pub fn admissible_eta_limit(&self) -> f64 {
        self.lambda_min_exact / (2.0 * self.n_steps as f64)
    }

    /// Same ingredients under a different noise ceiling.
    pub fn with_eta_max(&self, eta_max: f64) -> Result<Self> {
        finish_bound(
            self.k,
            self.n_steps,
            self.lambda_source,
            ExactEigen {
                lambda_1: self.lambda_1,
                lambda_min: self.lambda_min_exact,
                trace: self.trace_s,
            },
            self.lambda_min_analytic,
            self.delta_eff,
            eta_max,
        )
    }
}

/// Per-step and total-time bounds with every ingredient.
pub fn certainty_bound(
    input: BoundInput<'_>,
    eta_max: f64,
    lambda_source: LambdaSource,
) -> Result<CertaintyBound> {
    if !(eta_max.is_finite() && eta_max >= 0.0) {
        return Err(Error::InvalidNoise(format!(
            "eta_max must be non-negative, got {eta_max}"
        )));
    }
    match input {
        BoundInput::Model { model, grid } => {
            let exact = exact_eigen(model, grid)?;
            let (analytic, delta) = if model.k() == 1 {
                (grid.n_steps() as f64 * model.amps()[0], None)
            } else {
                (
                    lambda_min_analytic(model, grid)?.value(),
                    Some(effective_delta(model)?),
                )
            };
            finish_bound(
                model.k(),
                grid.n_steps(),
                lambda_source,
                exact,
                Some(analytic),
                delta,
                eta_max,
            )
        }
        BoundInput::Series { series, k } => {
            if lambda_source == LambdaSource::Analytic {
                return Err(Error::Precondition(
                    "analytic λ_min needs the model, not just a series".into(),
                ));
            }
            let n = series.grid().n_steps();
            let k = match k {
                Some(k) => k,
                None => {
                    let spectrum = hermitian_spectrum(&build_overlap(series))?;
                    detect_rank(&spectrum, series.eta_max(), n)?
                }
            };
            let exact = spectrum_eigen(series, k)?;
            finish_bound(k, n, lambda_source, exact, None, None, eta_max)
        }
    }
}

fn finish_bound(
    k: usize,
    n_steps: usize,
    lambda_source: LambdaSource,
    exact: ExactEigen,
    lambda_min_analytic: Option<f64>,
    delta_eff: Option<f64>,
    eta_max: f64,
) -> Result<CertaintyBound> {
    let lambda = match lambda_source {
        LambdaSource::Exact => exact.lambda_min,
        LambdaSource::Analytic => lambda_min_analytic
            .ok_or_else(|| Error::Precondition("analytic λ_min unavailable".into()))?,
    };
    let cond = condition_number(exact.lambda_1, lambda, exact.trace)?;
    let (kf, nf) = (k as f64, n_steps as f64);
    let bound_per_step = cond.kappa * kf * (nf + 1.0) * eta_max / lambda;
    let bound_total = kf * nf * (nf + 1.0) * exact.trace.sqrt() / lambda.powf(1.5) * eta_max;
    Ok(CertaintyBound {
        k,
        n_steps,
        lambda_source,
        lambda_min_exact: exact.lambda_min,
        lambda_min_analytic,
        lambda_1: exact.lambda_1,
        trace_s: exact.trace,
        kappa: cond.kappa,
        kappa_upper: cond.kappa_upper,
        delta_eff,
        bound_per_step,
        bound_total,
        eta_max,
        admissible: exact.lambda_min > 0.0 && eta_max < exact.lambda_min / (2.0 * nf),
    })
}
