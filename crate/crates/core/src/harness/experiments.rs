use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use super::stats::{linear_fit, median, min_max, spearman};
use super::{
    cell, parallel_map, trial_seed, Check, ExperimentConfig, ExperimentKind, Report, RunOptions,
    Table,
};
use crate::bounds::{
    certainty_bound, effective_delta, exact_eigen, lambda_min_analytic,
    lambda_min_char_poly_estimate, BoundInput, CertaintyBound,
};
use crate::error::{Error, Result};
use crate::inversion::{harmonic_invert, InversionConfig};
use crate::matrix::{vandermonde_gram_det_approx, vandermonde_gram_det_exact};
use crate::signal::{
    apply_noise, synthesize_autocorrelation, AutocorrSeries, FrequencyModel, NoiseSpec,
    SamplingGrid,
};

/// Errors below this (in units of `|ω̃ - ω| T`) count as zero when the
/// bound itself is zero.
pub const NOISELESS_ERROR_FLOOR: f64 = 1e-6;
/// Largest tolerated violation rate of the total-time bound.
pub const MAX_VIOLATION_RATE: f64 = 0.01;
/// Short-time regime used by the scaling fit, `T·Δ <= 0.05`.
pub const SCALING_REGIME: f64 = 0.05;
/// Relative slope tolerance of the scaling law.
pub const SCALING_SLOPE_TOL: f64 = 0.02;
/// Default tolerance of the Vandermonde approximation at the smallest `δt`.
pub const VANDERMONDE_TOL: f64 = 0.01;
/// Analytic/exact `λ_min` agreement for `T·Δω_max <= 0.05`.
pub const ANALYTIC_TOL: f64 = 0.10;
pub const ANALYTIC_REGIME: f64 = 0.05;
/// `λ_min/Tr(S)` below which the singular-value route no longer resolves
/// `λ_min` to better than ~1e-6 relative.
pub const LAMBDA_FLOOR: f64 = 1e-20;
/// Deviations below this are treated as converged when checking that
/// `|ratio - 1|` shrinks monotonically.
const MONOTONE_SLACK: f64 = 1e-7;
pub const SPEARMAN_ALPHA: f64 = 0.01;

/// Outcome of one noisy inversion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub detected_rank: usize,
    /// `|ω̃_k - ω_k|·T` per mode, paired after sorting both lists.
    pub errors: Vec<f64>,
    pub max_error: f64,
    pub bound_total: f64,
    pub tightness: f64,
    pub admissible: bool,
    /// Inversion failed or returned the wrong number of modes.
    pub failed: bool,
}

impl TrialRecord {
    pub fn violated(&self) -> bool {
        self.failed || self.tightness > 1.0
    }
}

fn tightness(max_error: f64, bound: f64) -> f64 {
    if bound > 0.0 {
        max_error / bound
    } else if max_error <= NOISELESS_ERROR_FLOOR {
        0.0
    } else {
        f64::INFINITY
    }
}

struct TrialSetup<'a> {
    model: &'a FrequencyModel,
    exact: &'a AutocorrSeries,
    noise: NoiseSpec,
    inversion: InversionConfig,
    bound: &'a CertaintyBound,
}

fn run_trial(setup: &TrialSetup<'_>, trial: usize, seed: u64) -> TrialRecord {
    let t = setup.exact.grid().total_time();
    let outcome = apply_noise(setup.exact, &setup.noise.with_seed(seed))
        .and_then(|noisy| harmonic_invert(&noisy, &setup.inversion));
    let (detected_rank, errors) = match outcome {
        Ok(r) => {
            let errors: Vec<f64> = if r.detected_rank == setup.model.k() {
                r.omegas
                    .iter()
                    .zip(setup.model.omegas())
                    .map(|(a, b)| (a - b).abs() * t)
                    .collect()
            } else {
                Vec::new()
            };
            (r.detected_rank, errors)
        }
        Err(e) => {
            log::debug!("trial {trial}: {e}");
            (0, Vec::new())
        }
    };
    let failed = errors.is_empty();
    let max_error = if failed {
        f64::INFINITY
    } else {
        errors.iter().copied().fold(0.0, f64::max)
    };
    TrialRecord {
        trial,
        seed,
        detected_rank,
        errors,
        max_error,
        bound_total: setup.bound.bound_total,
        tightness: tightness(max_error, setup.bound.bound_total),
        admissible: setup.bound.admissible,
        failed,
    }
}

fn trials_table(records: &[TrialRecord], k: usize) -> Table {
    let mut headers = vec![
        "trial".to_string(),
        "seed".into(),
        "detected_rank".into(),
        "admissible".into(),
        "max_error".into(),
        "bound_total".into(),
        "tightness".into(),
        "violated".into(),
        "failed".into(),
    ];
    headers.extend((1..=k).map(|i| format!("error_{i}")));
    let mut table = Table {
        name: "trials".into(),
        headers,
        rows: Vec::new(),
    };
    for r in records {
        let mut row = vec![
            r.trial.to_string(),
            r.seed.to_string(),
            r.detected_rank.to_string(),
            r.admissible.to_string(),
            cell(r.max_error),
            cell(r.bound_total),
            cell(r.tightness),
            r.violated().to_string(),
            r.failed.to_string(),
        ];
        row.extend((0..k).map(|i| r.errors.get(i).map_or_else(|| "nan".into(), |e| cell(*e))));
        table.push(row);
    }
    table
}

fn inadmissible(bound: &CertaintyBound) -> Error {
    Error::InvalidConfig(format!(
        "noise ceiling η_max = {:e} is not admissible (needs η_max < λ_min/(2N) = {:e}); \
         rerun with --force to run anyway",
        bound.eta_max,
        bound.admissible_eta_limit()
    ))
}

/// Monte Carlo check of the total-time bound on noisy inversions.
pub fn run_bound_validation(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Report> {
    let model = cfg.model()?;
    let grid = cfg.grid.grid()?;
    let noise = *cfg.noise()?;
    let eta = noise.effective_eta_max();
    let bound = certainty_bound(
        BoundInput::Model { model, grid: &grid },
        eta,
        cfg.lambda_source,
    )?;
    if !bound.admissible && !opts.force {
        return Err(inadmissible(&bound));
    }
    let exact = synthesize_autocorrelation(model, &grid)?;
    let setup = TrialSetup {
        model,
        exact: &exact,
        noise,
        inversion: InversionConfig::new(eta),
        bound: &bound,
    };
    let records = parallel_map(cfg.trials, opts.jobs, |i| {
        run_trial(&setup, i, trial_seed(cfg.base_seed, i as u64))
    })?;

    let n = records.len() as f64;
    let violations = records.iter().filter(|r| r.violated()).count();
    let rank_correct = records
        .iter()
        .filter(|r| r.detected_rank == model.k())
        .count();
    let ratios: Vec<f64> = records
        .iter()
        .filter(|r| !r.failed)
        .map(|r| r.tightness)
        .collect();
    let (t_min, t_max) = min_max(&ratios).unwrap_or((f64::NAN, f64::NAN));
    let violation_rate = violations as f64 / n;
    let rank_rate = rank_correct as f64 / n;

    let mut checks = Vec::new();
    if bound.admissible {
        checks.push(Check::at_most(
            "violation_rate",
            violation_rate,
            cfg.tolerance.unwrap_or(MAX_VIOLATION_RATE),
        ));
        checks.push(Check::at_least("rank_detection_rate", rank_rate, 1.0));
    }
    let details = json!({
        "trials": records.len(),
        "violations": violations,
        "violation_rate": violation_rate,
        "rank_correct": rank_correct,
        "rank_detection_rate": rank_rate,
        "misdetections": records.len() - rank_correct,
        "tightness_min": t_min,
        "tightness_median": median(&ratios),
        "tightness_max": t_max,
        "bound": bound,
        "forced": !bound.admissible,
    });
    Ok(Report {
        kind: ExperimentKind::BoundValidation,
        checks,
        details,
        tables: vec![trials_table(&records, model.k())],
    })
}

/// Grid of `n_steps` steps for one sweep value.
fn grid_for(parameter: &str, value: f64, n: usize, model: &FrequencyModel) -> Result<SamplingGrid> {
    match parameter {
        "delta_t" => SamplingGrid::new(value, n),
        "total_time" => SamplingGrid::with_total_time(value, n),
        "t_delta" => SamplingGrid::with_total_time(value / effective_delta(model)?, n),
        "t_gap" | "dt_gap" if model.k() < 2 => Err(Error::InvalidConfig(format!(
            "sweep over `{parameter}` needs at least two modes"
        ))),
        "t_gap" => SamplingGrid::with_total_time(value / model.max_gap(), n),
        "dt_gap" => SamplingGrid::new(value / model.max_gap(), n),
        other => Err(Error::InvalidConfig(format!(
            "unsupported time sweep parameter `{other}`"
        ))),
    }
}

const TIME_SWEEPS: [&str; 5] = ["delta_t", "total_time", "t_delta", "t_gap", "dt_gap"];

fn time_sweep(cfg: &ExperimentConfig) -> Result<(&'static str, Vec<f64>)> {
    for p in TIME_SWEEPS {
        if let Some(v) = cfg.sweep_values(p) {
            return Ok((p, v.to_vec()));
        }
    }
    Err(Error::InvalidConfig(format!(
        "missing time sweep (one of {})",
        TIME_SWEEPS.join(", ")
    )))
}

/// Fits `ln λ_min` against `ln T` inside the short-time regime.
pub fn run_lambda_scaling(cfg: &ExperimentConfig) -> Result<Report> {
    let models = cfg.model_list()?;
    let n = cfg.grid.n_steps()?;
    let (parameter, values) = time_sweep(cfg)?;
    let tol = cfg.tolerance.unwrap_or(SCALING_SLOPE_TOL);

    let mut table = Table::new(
        "scaling",
        &[
            "model",
            "k",
            "n_steps",
            "delta_t",
            "total_time",
            "delta_eff",
            "t_delta",
            "t_gap_max",
            "lambda_min_exact",
            "lambda_min_analytic",
            "in_regime",
            "outside_short_time",
        ],
    );
    let mut checks = Vec::new();
    let mut fits = Vec::new();
    for (mi, model) in models.iter().enumerate() {
        if model.k() < 2 {
            return Err(Error::InvalidConfig(format!(
                "model {mi}: scaling needs at least two modes"
            )));
        }
        let delta = effective_delta(model)?;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for v in &values {
            let grid = grid_for(parameter, *v, n, model)?;
            let exact = exact_eigen(model, &grid)?;
            let analytic = lambda_min_analytic(model, &grid)?.value();
            let t = grid.total_time();
            let in_regime = t * delta <= SCALING_REGIME;
            table.push(vec![
                mi.to_string(),
                model.k().to_string(),
                n.to_string(),
                cell(grid.delta_t()),
                cell(t),
                cell(delta),
                cell(t * delta),
                cell(t * model.max_gap()),
                cell(exact.lambda_min),
                cell(analytic),
                in_regime.to_string(),
                (!in_regime).to_string(),
            ]);
            if in_regime {
                xs.push(t.ln());
                ys.push(exact.lambda_min.ln());
            }
        }
        let expected = 2.0 * (model.k() - 1) as f64;
        let slope = linear_fit(&xs, &ys).map(|(s, _)| s).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "model {mi}: fewer than two sweep points satisfy T·Δ <= {SCALING_REGIME}"
            ))
        })?;
        let rel = (slope - expected).abs() / expected;
        checks.push(Check::at_most(
            format!("slope_rel_deviation[model={mi},K={}]", model.k()),
            rel,
            tol,
        ));
        fits.push(json!({
            "model": mi,
            "k": model.k(),
            "slope": slope,
            "expected": expected,
            "rel_deviation": rel,
            "points": xs.len(),
            "delta_eff": delta,
        }));
    }
    Ok(Report {
        kind: ExperimentKind::LambdaScaling,
        checks,
        details: json!({ "fits": fits, "regime": SCALING_REGIME }),
        tables: vec![table],
    })
}

/// Exact versus short-time Vandermonde Gram determinants.
pub fn run_vandermonde_check(cfg: &ExperimentConfig) -> Result<Report> {
    let models = cfg.model_list()?;
    let ns: Vec<usize> = match cfg.sweep_values("n_steps") {
        Some(v) => v.iter().map(|x| *x as usize).collect(),
        None => vec![cfg.grid.n_steps()?],
    };
    let (parameter, mut values) = time_sweep(cfg)?;
    values.sort_by(|a, b| b.total_cmp(a));
    let tol = cfg.tolerance.unwrap_or(VANDERMONDE_TOL);

    let mut table = Table::new(
        "vandermonde",
        &[
            "model",
            "k",
            "n_steps",
            "delta_t",
            "dt_gap",
            "det_exact",
            "det_approx",
            "ratio",
            "abs_deviation",
        ],
    );
    let mut checks = Vec::new();
    for (mi, model) in models.iter().enumerate() {
        let k = model.k();
        for &n in ns.iter().filter(|&&n| n >= k) {
            let mut devs = Vec::new();
            for v in &values {
                let grid = grid_for(parameter, *v, n, model)?;
                let exact = vandermonde_gram_det_exact(model.omegas(), &grid)?;
                let approx = vandermonde_gram_det_approx(model.omegas(), &grid)?;
                let ratio = exact / approx;
                devs.push((ratio - 1.0).abs());
                table.push(vec![
                    mi.to_string(),
                    k.to_string(),
                    n.to_string(),
                    cell(grid.delta_t()),
                    cell(grid.delta_t() * model.max_gap()),
                    cell(exact),
                    cell(approx),
                    cell(ratio),
                    cell((ratio - 1.0).abs()),
                ]);
            }
            let tag = format!("model={mi},K={k},N={n}");
            checks.push(Check::at_most(
                format!("deviation_at_smallest_dt[{tag}]"),
                *devs.last().expect("non-empty sweep"),
                tol,
            ));
            let monotone = devs
                .windows(2)
                .all(|w| w[1] <= w[0] || w[1] < MONOTONE_SLACK);
            checks.push(Check::flag(
                format!("monotone_convergence[{tag}]"),
                monotone,
            ));
        }
    }
    Ok(Report {
        kind: ExperimentKind::VandermondeCheck,
        checks,
        details: json!({ "tolerance": tol }),
        tables: vec![table],
    })
}

/// Two-mode system at fixed `T`, sweeping step count and copy number.
pub fn run_two_level(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Report> {
    let model = cfg.model()?;
    if model.k() != 2 {
        return Err(Error::InvalidConfig(format!(
            "two-level experiment needs exactly two modes, model has {}",
            model.k()
        )));
    }
    let total_time = cfg.grid.total_time()?;
    let ns: Vec<usize> = cfg
        .require_sweep("n_steps")?
        .iter()
        .map(|x| *x as usize)
        .collect();
    let copies: Vec<u64> = cfg
        .require_sweep("copies")?
        .iter()
        .map(|x| *x as u64)
        .collect();
    let base_noise = *cfg.noise()?;

    struct Cell {
        n: usize,
        m: u64,
        exact: AutocorrSeries,
        bound: CertaintyBound,
        analytic: f64,
        noise: NoiseSpec,
    }
    let mut cells = Vec::new();
    for &n in &ns {
        let grid = SamplingGrid::with_total_time(total_time, n)?;
        for &m in &copies {
            let noise = base_noise.with_copies(m);
            noise.validate()?;
            let bound = certainty_bound(
                BoundInput::Model { model, grid: &grid },
                noise.effective_eta_max(),
                cfg.lambda_source,
            )?;
            if !bound.admissible {
                log::warn!("N = {n}, M = {m}: inadmissible noise, skipped");
            }
            cells.push(Cell {
                n,
                m,
                exact: synthesize_autocorrelation(model, &grid)?,
                analytic: lambda_min_analytic(model, &grid)?.value(),
                bound,
                noise,
            });
        }
    }

    // Trials of all admissible cells share one index space for seeding.
    let jobs: Vec<(usize, usize)> = cells
        .iter()
        .enumerate()
        .filter(|(_, c)| c.bound.admissible || opts.force)
        .flat_map(|(ci, _)| (0..cfg.trials).map(move |t| (ci, t)))
        .collect();
    let records = parallel_map(jobs.len(), opts.jobs, |j| {
        let (ci, t) = jobs[j];
        let c = &cells[ci];
        let setup = TrialSetup {
            model,
            exact: &c.exact,
            noise: c.noise,
            inversion: InversionConfig::new(c.noise.effective_eta_max()).with_forced_rank(2),
            bound: &c.bound,
        };
        let index = (ci * cfg.trials + t) as u64;
        (ci, run_trial(&setup, t, trial_seed(cfg.base_seed, index)))
    })?;

    let (w, d) = (model.omegas(), model.amps());
    let mut table = Table::new(
        "two_level",
        &[
            "n_steps",
            "copies",
            "delta_t",
            "eta_max",
            "admissible",
            "lambda_min_exact",
            "lambda_min_analytic",
            "lambda_analytic_over_t2",
            "lambda_formula_over_t2",
            "bound_total",
            "median_error",
            "max_error",
            "violation_rate",
        ],
    );
    let mut per_cell_errors: Vec<Vec<f64>> = vec![Vec::new(); cells.len()];
    let mut per_cell_violations = vec![0usize; cells.len()];
    for (ci, r) in &records {
        per_cell_errors[*ci].push(r.max_error);
        per_cell_violations[*ci] += r.violated() as usize;
    }
    for (ci, c) in cells.iter().enumerate() {
        let nf = c.n as f64;
        let formula = (nf - 1.0 / nf) / 12.0 * (w[1] - w[0]).powi(2) / (1.0 / d[0] + 1.0 / d[1]);
        let errs = &per_cell_errors[ci];
        let ran = !errs.is_empty();
        table.push(vec![
            c.n.to_string(),
            c.m.to_string(),
            cell(total_time / nf),
            cell(c.noise.effective_eta_max()),
            c.bound.admissible.to_string(),
            cell(c.bound.lambda_min_exact),
            cell(c.analytic),
            cell(c.analytic / total_time.powi(2)),
            cell(formula),
            cell(c.bound.bound_total),
            median(errs).map_or_else(|| "nan".into(), cell),
            min_max(errs).map_or_else(|| "nan".into(), |(_, hi)| cell(hi)),
            if ran {
                cell(per_cell_violations[ci] as f64 / errs.len() as f64)
            } else {
                "nan".into()
            },
        ]);
    }

    let mut checks = Vec::new();
    let mut correlations = Vec::new();
    for &n in &ns {
        let row: Vec<(usize, &Cell)> = cells
            .iter()
            .enumerate()
            .filter(|(_, c)| c.n == n && c.bound.admissible)
            .collect();
        let mut worst = 0.0f64;
        for a in &row {
            for b in &row {
                if b.1.m == 4 * a.1.m {
                    let ratio = a.1.bound.bound_total / b.1.bound.bound_total;
                    worst = worst.max((ratio - 2.0).abs() / 2.0);
                }
            }
        }
        checks.push(Check::at_most(
            format!("bound_halving_per_4x_copies[N={n}]"),
            worst,
            1e-12,
        ));

        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (ci, c) in &row {
            for e in &per_cell_errors[*ci] {
                xs.push(c.m as f64);
                ys.push(*e);
            }
        }
        if let Some(corr) = spearman(&xs, &ys) {
            checks.push(Check::below(
                format!("error_vs_copies_rho[N={n}]"),
                corr.rho,
                0.0,
            ));
            checks.push(Check::below(
                format!("error_vs_copies_p[N={n}]"),
                corr.p_value,
                SPEARMAN_ALPHA,
            ));
            correlations.push(
                json!({"n_steps": n, "rho": corr.rho, "p_value": corr.p_value, "samples": corr.n}),
            );
        }
    }
    let analytic_by_n: Vec<f64> = ns
        .iter()
        .filter_map(|n| cells.iter().find(|c| c.n == *n).map(|c| c.analytic))
        .collect();
    checks.push(Check::flag(
        "lambda_analytic_increases_with_n",
        analytic_by_n.windows(2).all(|w| w[1] > w[0]),
    ));
    let skipped: Vec<_> = cells
        .iter()
        .filter(|c| !c.bound.admissible)
        .map(|c| json!({"n_steps": c.n, "copies": c.m}))
        .collect();
    Ok(Report {
        kind: ExperimentKind::TwoLevel,
        checks,
        details: json!({
            "total_time": total_time,
            "eta_base": base_noise.eta_max,
            "correlations": correlations,
            "skipped_inadmissible": skipped,
        }),
        tables: vec![table],
    })
}

fn random_model(k: usize, seed: u64) -> Result<FrequencyModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omegas: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
    let amps: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
    FrequencyModel::normalized(omegas, amps)
}

/// Analytic `λ_min` against the exact value over random models.
pub fn run_analytic_vs_exact(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Report> {
    let ks: Vec<usize> = cfg
        .require_sweep("k")?
        .iter()
        .map(|x| *x as usize)
        .collect();
    let ns: Vec<usize> = match cfg.sweep_values("n_steps") {
        Some(v) => v.iter().map(|x| *x as usize).collect(),
        None => vec![cfg.grid.n_steps()?],
    };
    let mut t_gaps = cfg.require_sweep("t_gap")?.to_vec();
    t_gaps.sort_by(|a, b| b.total_cmp(a));
    let tol = cfg.tolerance.unwrap_or(ANALYTIC_TOL);

    let combos: Vec<(usize, usize, usize)> = ks
        .iter()
        .flat_map(|&k| ns.iter().filter(move |&&n| n >= k).map(move |&n| (k, n)))
        .flat_map(|(k, n)| (0..cfg.trials).map(move |j| (k, n, j)))
        .collect();

    struct Row {
        t_gap: f64,
        delta_t: f64,
        exact: f64,
        analytic: f64,
        char_poly: f64,
        rel: f64,
    }
    let results = parallel_map(combos.len(), opts.jobs, |i| -> Result<(u64, Vec<Row>)> {
        let (k, n, j) = combos[i];
        let seed = trial_seed(
            cfg.base_seed,
            ((k as u64) << 48) | ((n as u64) << 32) | j as u64,
        );
        let model = random_model(k, seed)?;
        let rows = t_gaps
            .iter()
            .map(|tg| {
                let grid = SamplingGrid::with_total_time(tg / model.max_gap(), n)?;
                let e = exact_eigen(&model, &grid)?;
                Ok(Row {
                    t_gap: *tg,
                    delta_t: grid.delta_t(),
                    exact: e.lambda_min,
                    analytic: lambda_min_analytic(&model, &grid)?.value(),
                    char_poly: lambda_min_char_poly_estimate(&model, &grid)?,
                    rel: e.lambda_min / e.trace,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((seed, rows))
    })?;

    let mut table = Table::new(
        "analytic_vs_exact",
        &[
            "k",
            "n_steps",
            "model",
            "seed",
            "t_gap",
            "delta_t",
            "lambda_min_exact",
            "lambda_min_analytic",
            "lambda_min_char_poly",
            "ratio",
            "char_poly_ratio",
            "lambda_over_trace",
            "included",
        ],
    );
    let mut worst = 0.0f64;
    let mut included_count = 0usize;
    let mut excluded_count = 0usize;
    let mut non_monotone = 0usize;
    for ((k, n, j), res) in combos.iter().zip(results) {
        let (seed, rows) = res?;
        let mut devs = Vec::new();
        for r in &rows {
            let ratio = r.analytic / r.exact;
            let included = r.rel >= LAMBDA_FLOOR;
            if included {
                included_count += 1;
                devs.push((ratio - 1.0).abs());
                if r.t_gap <= ANALYTIC_REGIME {
                    worst = worst.max((ratio - 1.0).abs());
                }
            } else {
                excluded_count += 1;
            }
            table.push(vec![
                k.to_string(),
                n.to_string(),
                j.to_string(),
                seed.to_string(),
                cell(r.t_gap),
                cell(r.delta_t),
                cell(r.exact),
                cell(r.analytic),
                cell(r.char_poly),
                cell(ratio),
                cell(r.char_poly / r.exact),
                cell(r.rel),
                included.to_string(),
            ]);
        }
        if !devs
            .windows(2)
            .all(|w| w[1] <= w[0] || w[1] < MONOTONE_SLACK)
        {
            non_monotone += 1;
        }
    }
    let checks = vec![
        Check::at_most("max_rel_deviation_in_regime", worst, tol),
        Check::at_most("non_monotone_models", non_monotone as f64, 0.0),
        Check::at_least("included_cases", included_count as f64, 1.0),
    ];
    Ok(Report {
        kind: ExperimentKind::AnalyticVsExact,
        checks,
        details: json!({
            "models": combos.len(),
            "included_cases": included_count,
            "excluded_below_floor": excluded_count,
            "floor": LAMBDA_FLOOR,
            "regime": ANALYTIC_REGIME,
            "max_rel_deviation": worst,
        }),
        tables: vec![table],
    })
}
