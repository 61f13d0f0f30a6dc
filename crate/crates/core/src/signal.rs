//! Hidden frequency model, sampling grid and autocorrelation series.
//!
//! The autocorrelation of a state built from `K` nondegenerate modes is
//! `c_n = Σ_k d_k exp(-i ω_k n δt)`, sampled at `n = 0..=N`. Only the
//! populations `d_k` enter, so mode phases are not represented.

use std::io::{Read, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used to decide whether `Σ d_k = 1` holds.
const NORMALIZATION_TOL: f64 = 1e-12;

/// Ground-truth spectral content `{ω_k, d_k}` generating a signal.
///
/// Modes are stored sorted by ascending frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct FrequencyModel {
    omegas: Vec<f64>,
    amps: Vec<f64>,
    normalized: bool,
}

#[derive(Serialize, Deserialize)]
struct RawModel {
    omegas: Vec<f64>,
    amps: Vec<f64>,
}

impl TryFrom<RawModel> for FrequencyModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        FrequencyModel::new(raw.omegas, raw.amps)
    }
}

impl From<FrequencyModel> for RawModel {
    fn from(m: FrequencyModel) -> Self {
        RawModel {
            omegas: m.omegas,
            amps: m.amps,
        }
    }
}

impl FrequencyModel {
    pub fn new(omegas: Vec<f64>, amps: Vec<f64>) -> Result<Self> {
        if omegas.is_empty() {
            return Err(Error::InvalidModel("at least one mode is required".into()));
        }
        if omegas.len() != amps.len() {
            return Err(Error::InvalidModel(format!(
                "{} frequencies but {} amplitudes",
                omegas.len(),
                amps.len()
            )));
        }
        if let Some(w) = omegas.iter().find(|w| !w.is_finite()) {
            return Err(Error::InvalidModel(format!("non-finite frequency {w}")));
        }
        if let Some(d) = amps.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(Error::InvalidModel(format!(
                "amplitudes must be strictly positive, got {d}"
            )));
        }

        let mut modes: Vec<(f64, f64)> = omegas.into_iter().zip(amps).collect();
        modes.sort_by(|a, b| a.0.total_cmp(&b.0));
        if let Some(pair) = modes.windows(2).find(|p| p[0].0 == p[1].0) {
            return Err(Error::InvalidModel(format!(
                "duplicate frequency {}",
                pair[0].0
            )));
        }
        let (omegas, amps): (Vec<f64>, Vec<f64>) = modes.into_iter().unzip();
        let normalized = (amps.iter().sum::<f64>() - 1.0).abs() <= NORMALIZATION_TOL;
        Ok(Self {
            omegas,
            amps,
            normalized,
        })
    }

    /// Builds a model whose amplitudes are rescaled to sum to one.
    pub fn normalized(omegas: Vec<f64>, amps: Vec<f64>) -> Result<Self> {
        let total: f64 = amps.iter().sum();
        let mut model = Self::new(omegas, amps.iter().map(|d| d / total).collect())?;
        model.normalized = true;
        Ok(model)
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn amps(&self) -> &[f64] {
        &self.amps
    }

    /// Number of modes `K`.
    pub fn k(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn amp_sum(&self) -> f64 {
        self.amps.iter().sum()
    }

    /// Largest pairwise frequency difference (zero for a single mode).
    pub fn max_gap(&self) -> f64 {
        self.omegas[self.k() - 1] - self.omegas[0]
    }

    /// Smallest pairwise frequency difference (zero for a single mode).
    pub fn min_gap(&self) -> f64 {
        if self.k() == 1 {
            return 0.0;
        }
        self.omegas
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Same populations with every frequency shifted by `shift`.
    pub fn shifted(&self, shift: f64) -> Result<Self> {
        Self::new(
            self.omegas.iter().map(|w| w + shift).collect(),
            self.amps.clone(),
        )
    }

    /// Same frequencies with every population multiplied by `factor`.
    pub fn scaled_amps(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.omegas.clone(),
            self.amps.iter().map(|d| d * factor).collect(),
        )
    }
}

/// Uniform time grid `t = n δt`, `n = 0..=N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct SamplingGrid {
    delta_t: f64,
    n_steps: usize,
}

#[derive(Serialize, Deserialize)]
struct RawGrid {
    delta_t: f64,
    n_steps: usize,
}

impl TryFrom<RawGrid> for SamplingGrid {
    type Error = Error;

    fn try_from(raw: RawGrid) -> Result<Self> {
        SamplingGrid::new(raw.delta_t, raw.n_steps)
    }
}

impl From<SamplingGrid> for RawGrid {
    fn from(g: SamplingGrid) -> Self {
        RawGrid {
            delta_t: g.delta_t,
            n_steps: g.n_steps,
        }
    }
}

impl SamplingGrid {
    pub fn new(delta_t: f64, n_steps: usize) -> Result<Self> {
        if !(delta_t.is_finite() && delta_t > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "delta_t must be positive and finite, got {delta_t}"
            )));
        }
        if n_steps == 0 {
            return Err(Error::InvalidGrid("n_steps must be at least 1".into()));
        }
        Ok(Self { delta_t, n_steps })
    }

    /// Grid of `n_steps` steps spanning `total_time`.
    pub fn with_total_time(total_time: f64, n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::InvalidGrid("n_steps must be at least 1".into()));
        }
        Self::new(total_time / n_steps as f64, n_steps)
    }

    pub fn delta_t(&self) -> f64 {
        self.delta_t
    }

    /// `N`; the series holds `N + 1` samples.
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_samples(&self) -> usize {
        self.n_steps + 1
    }

    /// `T = N δt`.
    pub fn total_time(&self) -> f64 {
        self.n_steps as f64 * self.delta_t
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.delta_t
    }

    /// True when `T · Δω_max < threshold` for the given model.
    pub fn is_short_time(&self, model: &FrequencyModel, threshold: f64) -> bool {
        self.total_time() * model.max_gap() < threshold
    }
}

/// Sampled autocorrelation `c_0..=c_N`, possibly noise-corrupted.
#[derive(Debug, Clone, PartialEq)]
pub struct AutocorrSeries {
    values: Vec<Complex64>,
    grid: SamplingGrid,
    eta_max: f64,
}

impl AutocorrSeries {
    pub fn from_values(values: Vec<Complex64>, grid: SamplingGrid, eta_max: f64) -> Result<Self> {
        if values.len() != grid.n_samples() {
            return Err(Error::Precondition(format!(
                "series needs N+1 = {} samples, got {}",
                grid.n_samples(),
                values.len()
            )));
        }
        if !(eta_max.is_finite() && eta_max >= 0.0) {
            return Err(Error::InvalidNoise(format!(
                "eta_max must be non-negative, got {eta_max}"
            )));
        }
        Ok(Self {
            values,
            grid,
            eta_max,
        })
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn grid(&self) -> &SamplingGrid {
        &self.grid
    }

    pub fn eta_max(&self) -> f64 {
        self.eta_max
    }

    pub fn is_exact(&self) -> bool {
        self.eta_max == 0.0
    }

    /// Same samples under a different assumed noise ceiling.
    pub fn with_eta_max(mut self, eta_max: f64) -> Self {
        self.eta_max = eta_max;
        self
    }

    /// `c_j` for `j >= 0`, `conj(c_{-j})` for `j < 0`.
    pub fn value(&self, j: i64) -> Result<Complex64> {
        let max = self.grid.n_steps;
        let idx = j.unsigned_abs() as usize;
        if idx > max {
            return Err(Error::IndexOutOfRange { index: j, max });
        }
        let c = self.values[idx];
        Ok(if j < 0 { c.conj() } else { c })
    }

    /// Writes `n,t,re_c,im_c` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::InvalidConfig(format!("csv write: {e}"));
        w.write_record(["n", "t", "re_c", "im_c"]).map_err(io)?;
        for (n, c) in self.values.iter().enumerate() {
            w.write_record([
                n.to_string(),
                fmt_f64(self.grid.time(n)),
                fmt_f64(c.re),
                fmt_f64(c.im),
            ])
            .map_err(io)?;
        }
        w.flush()
            .map_err(|e| Error::InvalidConfig(format!("csv write: {e}")))?;
        Ok(())
    }

    /// Reads a series written by [`AutocorrSeries::write_csv`].
    ///
    /// `δt` is taken from the `t` column of row `n = 1`.
    pub fn read_csv<R: Read>(input: R, eta_max: f64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r
            .headers()
            .map_err(|e| Error::InvalidConfig(format!("series csv: {e}")))?
            .clone();
        if headers.iter().collect::<Vec<_>>() != ["n", "t", "re_c", "im_c"] {
            return Err(Error::InvalidConfig(format!(
                "series csv header must be n,t,re_c,im_c, got {}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (row, rec) in r.deserialize::<(usize, f64, f64, f64)>().enumerate() {
            let (n, t, re, im) =
                rec.map_err(|e| Error::InvalidConfig(format!("series csv row {row}: {e}")))?;
            if n != row {
                return Err(Error::InvalidConfig(format!(
                    "series csv row {row} has index n = {n}"
                )));
            }
            times.push(t);
            values.push(Complex64::new(re, im));
        }
        if values.len() < 2 {
            return Err(Error::InvalidConfig(
                "series csv needs at least two samples".into(),
            ));
        }
        let grid = SamplingGrid::new(times[1], values.len() - 1)?;
        Self::from_values(values, grid, eta_max)
    }
}

/// Full-precision decimal rendering (17 significant digits).
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Distribution of individual noise samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    /// Uniform on the complex disk of radius `eta_max`.
    #[default]
    UniformDisk,
    /// Circular complex Gaussian with per-component `σ = eta_max/3`,
    /// resampled when `|η| > eta_max`.
    TruncatedGaussian,
}

/// Bounded additive complex noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Base ceiling; divided by `√copies` when `copies` is set.
    pub eta_max: f64,
    #[serde(default)]
    pub kind: NoiseKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub copies: Option<u64>,
}

impl NoiseSpec {
    pub fn new(eta_max: f64, kind: NoiseKind, seed: u64) -> Self {
        Self {
            eta_max,
            kind,
            seed,
            copies: None,
        }
    }

    pub fn with_copies(mut self, copies: u64) -> Self {
        self.copies = Some(copies);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta_max.is_finite() && self.eta_max >= 0.0) {
            return Err(Error::InvalidNoise(format!(
                "eta_max must be non-negative and finite, got {}",
                self.eta_max
            )));
        }
        if self.copies == Some(0) {
            return Err(Error::InvalidNoise("copies must be at least 1".into()));
        }
        Ok(())
    }

    /// Ceiling after the copies reduction `eta_base / √M`.
    pub fn effective_eta_max(&self) -> f64 {
        match self.copies {
            Some(m) => self.eta_max / (m as f64).sqrt(),
            None => self.eta_max,
        }
    }

    /// Draws `count` noise samples, each with modulus at most the effective ceiling.
    pub fn sample(&self, count: usize) -> Vec<Complex64> {
        let eta = self.effective_eta_max();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        match self.kind {
            NoiseKind::UniformDisk => (0..count)
                .map(|_| {
                    let r = eta * rng.random::<f64>().sqrt();
                    let theta = std::f64::consts::TAU * rng.random::<f64>();
                    Complex64::from_polar(r, theta)
                })
                .collect(),
            NoiseKind::TruncatedGaussian => {
                let normal = Normal::new(0.0, eta / 3.0).expect("finite sigma");
                (0..count)
                    .map(|_| loop {
                        let z = Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
                        if z.norm() <= eta {
                            break z;
                        }
                    })
                    .collect()
            }
        }
    }
}

/// Exact samples `c_n = Σ_k d_k exp(-i ω_k n δt)` for `n = 0..=N`.
pub fn synthesize_autocorrelation(
    model: &FrequencyModel,
    grid: &SamplingGrid,
) -> Result<AutocorrSeries> {
    if grid.n_steps() < model.k() {
        return Err(Error::InvalidGrid(format!(
            "N = {} is smaller than the number of modes K = {}",
            grid.n_steps(),
            model.k()
        )));
    }
    let values = (0..grid.n_samples())
        .map(|n| {
            let t = grid.time(n);
            model
                .omegas()
                .iter()
                .zip(model.amps())
                .map(|(w, d)| Complex64::from_polar(*d, -w * t))
                .sum()
        })
        .collect();
    AutocorrSeries::from_values(values, *grid, 0.0)
}

/// Adds independent bounded noise `η_n` to every sample of an exact series.
pub fn apply_noise(series: &AutocorrSeries, noise: &NoiseSpec) -> Result<AutocorrSeries> {
    if !series.is_exact() {
        return Err(Error::Precondition(
            "noise can only be applied to an exact series".into(),
        ));
    }
    noise.validate()?;
    let eta = noise.effective_eta_max();
    if eta == 0.0 {
        return Ok(series.clone());
    }
    let values = series
        .values()
        .iter()
        .zip(noise.sample(series.values().len()))
        .map(|(c, e)| c + e)
        .collect();
    AutocorrSeries::from_values(values, *series.grid(), eta)
}
