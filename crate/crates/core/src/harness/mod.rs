//! Monte Carlo and sweep experiments with CSV/JSON reports.
//!
//! Every trial draws its noise from a seed that is a pure function of
//! `(base_seed, trial index)`, so reports are byte-identical across runs
//! and worker counts.

mod experiments;
pub mod stats;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bounds::LambdaSource;
use crate::error::{Error, Result};
use crate::signal::{fmt_f64, FrequencyModel, NoiseSpec, SamplingGrid};

pub use experiments::{
    run_analytic_vs_exact, run_bound_validation, run_lambda_scaling, run_two_level,
    run_vandermonde_check, TrialRecord,
};

/// splitmix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `index`: `splitmix64(base_seed ^ splitmix64(index))`.
pub fn trial_seed(base_seed: u64, index: u64) -> u64 {
    splitmix64(base_seed ^ splitmix64(index))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    BoundValidation,
    LambdaScaling,
    VandermondeCheck,
    TwoLevel,
    AnalyticVsExact,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::BoundValidation => "bound-validation",
            ExperimentKind::LambdaScaling => "lambda-scaling",
            ExperimentKind::VandermondeCheck => "vandermonde-check",
            ExperimentKind::TwoLevel => "two-level",
            ExperimentKind::AnalyticVsExact => "analytic-vs-exact",
        }
    }
}

/// Grid section of an experiment config. `total_time` with `n_steps`
/// fixes `δt = T/N`; otherwise `delta_t` is required.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_time: Option<f64>,
}

impl GridConfig {
    pub fn n_steps(&self) -> Result<usize> {
        self.n_steps
            .ok_or_else(|| Error::InvalidConfig("missing field `grid.n_steps`".into()))
    }

    pub fn total_time(&self) -> Result<f64> {
        self.total_time
            .ok_or_else(|| Error::InvalidConfig("missing field `grid.total_time`".into()))
    }

    pub fn grid(&self) -> Result<SamplingGrid> {
        let n = self.n_steps()?;
        match (self.delta_t, self.total_time) {
            (Some(dt), _) => SamplingGrid::new(dt, n),
            (None, Some(t)) => SamplingGrid::with_total_time(t, n),
            (None, None) => Err(Error::InvalidConfig(
                "missing field `grid.delta_t` (or `grid.total_time`)".into(),
            )),
        }
    }
}

/// One swept parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum SweepField {
    One(Sweep),
    Many(Vec<Sweep>),
}

fn deserialize_sweeps<'de, D>(d: D) -> std::result::Result<Vec<Sweep>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    Ok(match Option::<SweepField>::deserialize(d)? {
        None => Vec::new(),
        Some(SweepField::One(s)) => vec![s],
        Some(SweepField::Many(v)) => v,
    })
}

fn default_trials() -> usize {
    1
}

/// Experiment description as read from JSON.
///
/// `sweep` accepts a single `{"parameter", "values"}` object or a list of
/// them. `models` lists several ground-truth models for the kinds that
/// compare mode counts (`lambda-scaling`, `vandermonde-check`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<FrequencyModel>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub models: Vec<FrequencyModel>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
    #[serde(default, deserialize_with = "deserialize_sweeps")]
    pub sweep: Vec<Sweep>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub lambda_source: LambdaSource,
    /// Acceptance tolerance overriding the kind's default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("experiment config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig(
                "field `trials` must be at least 1".into(),
            ));
        }
        for s in &self.sweep {
            if s.values.is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "field `sweep.values` for `{}` is empty",
                    s.parameter
                )));
            }
        }
        if let Some(noise) = &self.noise {
            noise.validate()?;
        }
        Ok(())
    }

    pub fn model(&self) -> Result<&FrequencyModel> {
        self.model
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("missing field `model`".into()))
    }

    /// `models` if given, else the single `model`.
    pub fn model_list(&self) -> Result<Vec<FrequencyModel>> {
        if !self.models.is_empty() {
            Ok(self.models.clone())
        } else {
            Ok(vec![self.model()?.clone()])
        }
    }

    pub fn noise(&self) -> Result<&NoiseSpec> {
        self.noise
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("missing field `noise`".into()))
    }

    pub fn sweep_values(&self, parameter: &str) -> Option<&[f64]> {
        self.sweep
            .iter()
            .find(|s| s.parameter == parameter)
            .map(|s| s.values.as_slice())
    }

    pub fn require_sweep(&self, parameter: &str) -> Result<&[f64]> {
        self.sweep_values(parameter)
            .ok_or_else(|| Error::InvalidConfig(format!("missing sweep over `{parameter}`")))
    }
}

/// Execution options that do not change results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Run inadmissible noise configurations instead of refusing them.
    pub force: bool,
    /// Worker threads; results do not depend on this.
    pub jobs: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            force: false,
            jobs: 1,
        }
    }
}

/// Maps `f` over `0..count` on `jobs` workers, keeping index order.
pub(crate) fn parallel_map<T, F>(count: usize, jobs: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    if jobs <= 1 {
        return Ok((0..count).map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    Ok(pool.install(|| (0..count).into_par_iter().map(f).collect()))
}

/// One acceptance threshold and its outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    /// `"<="`, `"<"`, `">="` or `"=="`.
    pub comparison: String,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            comparison: "<=".into(),
            pass: value <= threshold,
        }
    }

    pub fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            comparison: "<".into(),
            pass: value < threshold,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            comparison: ">=".into(),
            pass: value >= threshold,
        }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            threshold: 1.0,
            comparison: "==".into(),
            pass: ok,
        }
    }
}

/// Rows of one CSV output.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub name: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, headers: &[&str]) -> Self {
        Self {
            name: name.into(),
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn column(&self, header: &str) -> Option<Vec<&str>> {
        let idx = self.headers.iter().position(|h| h == header)?;
        Some(self.rows.iter().map(|r| r[idx].as_str()).collect())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Io(format!("csv: {e}"));
        w.write_record(&self.headers).map_err(err)?;
        for row in &self.rows {
            w.write_record(row).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }
}

pub(crate) fn cell(x: f64) -> String {
    fmt_f64(x)
}

/// Summary plus tables of a finished experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub kind: ExperimentKind,
    pub checks: Vec<Check>,
    /// Kind-specific aggregate statistics and ingredient values.
    pub details: Value,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn summary_json(&self) -> Result<String> {
        let summary = serde_json::json!({
            "kind": self.kind.name(),
            "pass": self.passed(),
            "checks": self.checks,
            "details": self.details,
        });
        serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.to_string()))
    }

    /// Writes `summary.json` and one `<table>.csv` per table into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        let write = |name: &str, text: String| {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
        };
        write("summary.json", self.summary_json()? + "\n")?;
        for t in &self.tables {
            write(&format!("{}.csv", t.name), t.to_csv()?)?;
        }
        Ok(())
    }
}

/// Runs the experiment selected by `config.kind`.
pub fn run_experiment(config: &ExperimentConfig, opts: RunOptions) -> Result<Report> {
    config.validate()?;
    match config.kind {
        ExperimentKind::BoundValidation => run_bound_validation(config, opts),
        ExperimentKind::LambdaScaling => run_lambda_scaling(config),
        ExperimentKind::VandermondeCheck => run_vandermonde_check(config),
        ExperimentKind::TwoLevel => run_two_level(config, opts),
        ExperimentKind::AnalyticVsExact => run_analytic_vs_exact(config, opts),
    }
}
