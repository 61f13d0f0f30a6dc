//! Command-line front end of the `harmcert` binary.

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bounds::{certainty_bound, BoundInput, LambdaSource};
use crate::error::{Error, Result};
use crate::harness::{run_experiment, ExperimentConfig, RunOptions};
use crate::inversion::{harmonic_invert, InversionConfig};
use crate::matrix::{vandermonde_gram_det_approx, vandermonde_gram_det_exact};
use crate::signal::{
    apply_noise, synthesize_autocorrelation, AutocorrSeries, FrequencyModel, NoiseSpec,
    SamplingGrid,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "harmcert",
    version,
    about = "Harmonic inversion with frequency-error bounds"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the autocorrelation of a model, optionally with noise.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `noise.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Recover modes from a series CSV.
    Invert {
        #[arg(long)]
        series: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        eta: f64,
        /// Skip rank detection and keep this many modes.
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the frequency-error bound for a model or a series.
    Bound {
        /// Model file in the `synth` format.
        #[arg(long, conflicts_with = "series", required_unless_present = "series")]
        config: Option<PathBuf>,
        #[arg(long)]
        series: Option<PathBuf>,
        /// Noise ceiling; defaults to the model's effective `noise.eta_max`.
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long, value_enum, default_value = "exact")]
        lambda_source: LambdaSourceArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the exact Vandermonde Gram determinant with its short-time form.
    CheckVandermonde {
        /// Model file in the `synth` format.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        tolerance: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment and write its report.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Report directory; defaults to the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `base_seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Run inadmissible noise configurations.
        #[arg(long)]
        force: bool,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum LambdaSourceArg {
    Exact,
    Analytic,
}

impl From<LambdaSourceArg> for LambdaSource {
    fn from(a: LambdaSourceArg) -> Self {
        match a {
            LambdaSourceArg::Exact => LambdaSource::Exact,
            LambdaSourceArg::Analytic => LambdaSource::Analytic,
        }
    }
}

/// Flat model file: modes, grid and optional noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub omegas: Vec<f64>,
    pub amps: Vec<f64>,
    pub delta_t: f64,
    pub n_steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("model config: {e}")))?;
        if let Some(n) = &cfg.noise {
            n.validate()?;
        }
        Ok(cfg)
    }

    pub fn model(&self) -> Result<FrequencyModel> {
        FrequencyModel::new(self.omegas.clone(), self.amps.clone())
    }

    pub fn grid(&self) -> Result<SamplingGrid> {
        SamplingGrid::new(self.delta_t, self.n_steps)
    }
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::InvalidModel(_)
        | Error::InvalidGrid(_)
        | Error::InvalidNoise(_)
        | Error::InvalidConfig(_)
        | Error::Io(_) => EXIT_USAGE,
        _ => EXIT_NUMERICAL,
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn read_series(path: &Path, eta: f64) -> Result<AutocorrSeries> {
    let f = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    AutocorrSeries::read_csv(f, eta)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::Io(e.to_string())),
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| Error::Io(e.to_string()))
}

/// Parses `argv` (program name first) and runs it, returning the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Synth { config, out, seed } => {
            let cfg = ModelConfig::from_json(&read_text(&config)?)?;
            let exact = synthesize_autocorrelation(&cfg.model()?, &cfg.grid()?)?;
            let series = match cfg.noise {
                Some(noise) => {
                    let noise = seed.map_or(noise, |s| noise.with_seed(s));
                    apply_noise(&exact, &noise)?
                }
                None => exact,
            };
            let mut buf = Vec::new();
            series.write_csv(&mut buf)?;
            emit(out.as_deref(), &String::from_utf8_lossy(&buf))?;
            Ok(EXIT_OK)
        }
        Command::Invert {
            series,
            eta,
            rank,
            out,
        } => {
            let s = read_series(&series, eta)?;
            let mut config = InversionConfig::new(eta);
            if let Some(k) = rank {
                config = config.with_forced_rank(k);
            }
            let result = harmonic_invert(&s, &config)?;
            emit(out.as_deref(), &to_json(&result)?)?;
            Ok(EXIT_OK)
        }
        Command::Bound {
            config,
            series,
            eta,
            rank,
            lambda_source,
            out,
        } => {
            let bound = if let Some(path) = config {
                let cfg = ModelConfig::from_json(&read_text(&path)?)?;
                let eta = eta
                    .or(cfg.noise.map(|n| n.effective_eta_max()))
                    .ok_or_else(|| {
                        Error::InvalidConfig("missing `--eta` (or field `noise.eta_max`)".into())
                    })?;
                let (model, grid) = (cfg.model()?, cfg.grid()?);
                certainty_bound(
                    BoundInput::Model {
                        model: &model,
                        grid: &grid,
                    },
                    eta,
                    lambda_source.into(),
                )?
            } else {
                let path = series.expect("clap requires --config or --series");
                let eta = eta.ok_or_else(|| Error::InvalidConfig("missing `--eta`".into()))?;
                let s = read_series(&path, eta)?;
                certainty_bound(
                    BoundInput::Series {
                        series: &s,
                        k: rank,
                    },
                    eta,
                    lambda_source.into(),
                )?
            };
            if !bound.admissible {
                eprintln!(
                    "warning: eta_max {:e} is not admissible (limit {:e})",
                    bound.eta_max,
                    bound.admissible_eta_limit()
                );
            }
            emit(out.as_deref(), &to_json(&bound)?)?;
            Ok(EXIT_OK)
        }
        Command::CheckVandermonde {
            config,
            tolerance,
            out,
        } => {
            let cfg = ModelConfig::from_json(&read_text(&config)?)?;
            let (model, grid) = (cfg.model()?, cfg.grid()?);
            let exact = vandermonde_gram_det_exact(model.omegas(), &grid)?;
            let approx = vandermonde_gram_det_approx(model.omegas(), &grid)?;
            let ratio = exact / approx;
            let pass = (ratio - 1.0).abs() <= tolerance;
            let report = json!({
                "k": model.k(),
                "n_steps": grid.n_steps(),
                "delta_t": grid.delta_t(),
                "det_exact": exact,
                "det_approx": approx,
                "ratio": ratio,
                "tolerance": tolerance,
                "pass": pass,
            });
            emit(out.as_deref(), &to_json(&report)?)?;
            Ok(if pass { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
        Command::Experiment {
            config,
            out,
            seed,
            trials,
            force,
            jobs,
        } => {
            let mut cfg = ExperimentConfig::from_json(&read_text(&config)?)?;
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if jobs == 0 {
                return Err(Error::InvalidConfig("`--jobs` must be at least 1".into()));
            }
            let report = run_experiment(&cfg, RunOptions { force, jobs })?;
            match out.or_else(|| cfg.output.as_ref().map(PathBuf::from)) {
                Some(dir) => {
                    report.write_to(&dir)?;
                    let failed: Vec<_> = report.checks.iter().filter(|c| !c.pass).collect();
                    println!(
                        "{}: {} ({} checks, {} failed) -> {}",
                        report.kind.name(),
                        if report.passed() { "pass" } else { "FAIL" },
                        report.checks.len(),
                        failed.len(),
                        dir.display()
                    );
                    for c in failed {
                        println!(
                            "  failed {}: {:e} {} {:e}",
                            c.name, c.value, c.comparison, c.threshold
                        );
                    }
                }
                None => emit(None, &(report.summary_json()? + "\n"))?,
            }
            Ok(if report.passed() {
                EXIT_OK
            } else {
                EXIT_CHECK_FAILED
            })
        }
    }
}
