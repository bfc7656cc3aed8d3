//! The experiment subcommands: single runs, method comparison, growth-factor
//! sweeps, training-error curves, and validation-loss stopping.
//!
//! Every CSV starts with a `# subspectral <schema>` comment line. All outputs
//! are deterministic functions of the resolved options: run `i` of a batch
//! uses the seed derived from `(base seed, i)` and repetitions are aggregated
//! in index order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde_json::json;

use subspectral::dataset::{self, Dataset};
use subspectral::linesearch::LineSearchParams;
use subspectral::objective::LogisticObjective;
use subspectral::report::{run_summary_json, status_str, trace_to_csv};
use subspectral::solver::{run, run_full, zero_start, RunStatus, SolverConfig};
use subspectral::{
    seed_for_run, FiniteSumObjective, GeometricSchedule, LogisticObjective64, MethodName,
    RunResult64, StopRule,
};

use crate::config::{DataSource, Options};

/// Exit disposition of a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// A required run declared line-search failure at the full sample.
    DeclaredFailure,
}

pub fn load_objective(opts: &Options) -> Result<LogisticObjective64> {
    let ds: Dataset<f64> = match &opts.source {
        DataSource::Libsvm(path) => dataset::load_libsvm(path)
            .with_context(|| format!("loading {}", path.display()))?,
        DataSource::Csv(path) => {
            dataset::load_csv(path).with_context(|| format!("loading {}", path.display()))?
        }
        DataSource::Synthetic {
            dim,
            count,
            noise,
            condition,
        } => dataset::synthesize_conditioned(*dim, *count, opts.data_seed, *noise, *condition),
    };
    let split = dataset::split(&ds, opts.train_fraction, opts.data_seed.wrapping_add(1))?;
    Ok(LogisticObjective::new(ds, split, None))
}

fn solver_config_for(
    opts: &Options,
    method: MethodName,
    full: usize,
    stop: StopRule<f64>,
) -> SolverConfig<f64> {
    let schedule = if method == MethodName::SgFull {
        GeometricSchedule::full_only(full)
    } else {
        GeometricSchedule::new(opts.n0.min(full), opts.tau, full)
    };
    let mut config = SolverConfig::new(method, schedule, stop);
    config.max_iter = opts.max_iter;
    config.diagnostics = opts.diagnostics;
    config
}

fn grad_stop(opts: &Options) -> StopRule<f64> {
    StopRule::GradNorm {
        eps: opts.eps,
        require_full: true,
    }
}

/// Seeded batch of `opts.runs` runs, parallel over repetitions, results in
/// run-index order.
fn run_batch(
    objective: &LogisticObjective64,
    config: &SolverConfig<f64>,
    opts: &Options,
) -> Vec<RunResult64> {
    let x0 = zero_start(objective);
    (0..opts.runs)
        .into_par_iter()
        .map(|i| run(objective, config, &x0, seed_for_run(opts.seed, i)))
        .collect()
}

fn write_out(dir: &Path, name: &str, content: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

/// `run`: a single seeded run, trace CSV plus summary JSON.
pub fn cmd_run(opts: &Options) -> Result<Outcome> {
    if opts.methods.len() != 1 {
        bail!("`run` takes exactly one --method");
    }
    let method = opts.methods[0];
    let objective = load_objective(opts)?;
    let config = solver_config_for(opts, method, objective.component_count(), grad_stop(opts));
    let result = run(&objective, &config, &zero_start(&objective), opts.seed);

    write_out(
        &opts.out,
        "trace.csv",
        &trace_to_csv(&result.trace, opts.diagnostics),
    )?;
    let mut summary = run_summary_json(&result);
    summary["config"] = config_echo(opts, &objective);
    if opts.diagnostics {
        summary["diagnostics_report"] = diagnostics_report(&objective, &result)?;
    }
    write_out(
        &opts.out,
        "summary.json",
        &serde_json::to_string_pretty(&summary)?,
    )?;
    eprintln!(
        "{method}: {} after {} iterations, SP/N = {:.2}",
        status_str(result.status),
        result.iterations(),
        result.counters.sp_normalized()
    );
    Ok(if result.status == RunStatus::LineSearchFailure {
        Outcome::DeclaredFailure
    } else {
        Outcome::Success
    })
}

fn config_echo(opts: &Options, objective: &LogisticObjective64) -> serde_json::Value {
    json!({
        "n0": opts.n0,
        "tau": opts.tau,
        "eps": opts.eps,
        "seed": opts.seed,
        "train_count": objective.component_count(),
        "dimension": objective.dimension(),
        "lambda": objective.lambda(),
        "max_iter": opts.max_iter,
    })
}

/// Per-check theory report for a diagnostics-enabled run: the descent-chain
/// verification against the analytic constants, the measured approximation
/// error sums, and the curvature-condition rate.
fn diagnostics_report(
    objective: &LogisticObjective64,
    result: &RunResult64,
) -> Result<serde_json::Value> {
    use subspectral::diagnostics::{descent_chain_check, TheoryConstants};
    let ls = LineSearchParams::<f64>::default();
    let constants = TheoryConstants::new(
        ls.c1,
        ls.c2,
        objective.lipschitz_bound(),
        objective.strong_convexity_bound(),
    );
    let chain = descent_chain_check(&result.trace, constants.c_factor)?;
    let nu_bar: f64 = result
        .trace
        .iter()
        .filter_map(|r| r.diagnostics.as_ref())
        .map(|d| d.nu)
        .sum();
    let zeta_bar: f64 = result.trace.iter().map(|r| r.zeta).sum();
    Ok(json!({
        "constants": constants,
        "descent_chain": {
            "pass": chain.clean(),
            "checked": chain.checked,
            "violations": chain.violations.len(),
            "worst_margin": chain.worst_margin,
        },
        "nu_bar_measured": nu_bar,
        "zeta_bar_measured": zeta_bar,
        "wolfe_rate": result.wolfe_rate(),
    }))
}

struct MethodStats {
    method: MethodName,
    converged: usize,
    failed: usize,
    it: f64,
    sp: f64,
    fe: f64,
    ge1: f64,
    ge2: f64,
}

fn aggregate(method: MethodName, results: &[RunResult64]) -> MethodStats {
    let ok: Vec<&RunResult64> = results
        .iter()
        .filter(|r| r.status == RunStatus::Converged)
        .collect();
    let failed = results.len() - ok.len();
    let n = ok.len().max(1) as f64;
    let mean = |f: &dyn Fn(&RunResult64) -> f64| ok.iter().map(|r| f(r)).sum::<f64>() / n;
    MethodStats {
        method,
        converged: ok.len(),
        failed,
        it: mean(&|r| r.iterations() as f64),
        sp: mean(&|r| r.counters.sp_normalized()),
        fe: mean(&|r| r.counters.fe_normalized()),
        ge1: mean(&|r| r.counters.ge1_normalized()),
        ge2: mean(&|r| r.counters.ge2_normalized()),
    }
}

/// `compare`: R seeded runs per method, Table-style means with costs
/// normalized by the training-set size.
pub fn cmd_compare(opts: &Options) -> Result<Outcome> {
    let objective = load_objective(opts)?;
    let full = objective.component_count();

    let mut csv = String::from("# subspectral compare-v1\nMETHOD,IT,SP,FE,GE_1,GE_2\n");
    let mut rows = Vec::new();
    for &method in &opts.methods {
        let config = solver_config_for(opts, method, full, grad_stop(opts));
        let results = run_batch(&objective, &config, opts);
        let stats = aggregate(method, &results);
        if stats.failed > 0 {
            eprintln!(
                "warning: {method}: {} of {} runs did not converge; excluded from means",
                stats.failed,
                results.len()
            );
        }
        let _ = writeln!(
            csv,
            "{},{:.1},{:.4},{:.4},{:.4},{:.4}",
            stats.method, stats.it, stats.sp, stats.fe, stats.ge1, stats.ge2
        );
        rows.push(json!({
            "method": stats.method.to_string(),
            "runs": results.len(),
            "converged": stats.converged,
            "failed": stats.failed,
            "it_mean": stats.it,
            "sp_mean": stats.sp,
            "fe_mean": stats.fe,
            "ge1_mean": stats.ge1,
            "ge2_mean": stats.ge2,
        }));
    }
    write_out(&opts.out, "compare.csv", &csv)?;
    let summary = json!({
        "schema": "compare-v1",
        "base_seed": opts.seed,
        "runs_per_method": opts.runs,
        "config": config_echo(opts, &objective),
        "methods": rows,
    });
    write_out(
        &opts.out,
        "compare.json",
        &serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(Outcome::Success)
}

/// The growth-factor grid: 1.1 … 1.9 by 0.1, then 2.0 … 5.0 by 0.25.
pub fn default_tau_grid() -> Vec<f64> {
    let mut grid: Vec<f64> = (11..=19).map(|i| i as f64 / 10.0).collect();
    grid.extend((8..=20).map(|i| i as f64 * 0.25));
    grid
}

/// Mean of the central values after dropping the `trim` smallest and largest.
fn trimmed_mean(values: &[f64], trim: usize) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let central = &sorted[trim..sorted.len() - trim];
    central.iter().sum::<f64>() / central.len() as f64
}

/// `tau-sweep`: trimmed mean of the normalized scalar-product cost per
/// growth factor and method, with the min-max spread as a variance proxy.
pub fn cmd_tau_sweep(opts: &Options, grid: Option<Vec<f64>>) -> Result<Outcome> {
    if 2 * opts.trim >= opts.runs {
        bail!(
            "--trim {} discards everything at --runs {}",
            opts.trim,
            opts.runs
        );
    }
    let grid = grid.unwrap_or_else(default_tau_grid);
    if grid.is_empty() {
        bail!("empty tau grid");
    }
    let objective = load_objective(opts)?;
    let full = objective.component_count();

    let mut csv = String::from("# subspectral tau-sweep-v1\ntau,method,sp_trimmed_mean,sp_min,sp_max\n");
    let mut rows = Vec::new();
    for &tau in &grid {
        for &method in &opts.methods {
            let mut tau_opts = opts.clone();
            tau_opts.tau = tau;
            let config = solver_config_for(&tau_opts, method, full, grad_stop(opts));
            let results = run_batch(&objective, &config, opts);
            let sp: Vec<f64> = results
                .iter()
                .filter(|r| r.status == RunStatus::Converged)
                .map(|r| r.counters.sp_normalized())
                .collect();
            let failed = results.len() - sp.len();
            if failed > 0 {
                eprintln!("warning: tau={tau} {method}: {failed} runs failed; excluded");
            }
            if sp.len() <= 2 * opts.trim {
                bail!("tau={tau} {method}: too few converged runs to trim");
            }
            let mean = trimmed_mean(&sp, opts.trim);
            let min = sp.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = sp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let _ = writeln!(csv, "{tau},{method},{mean:.4},{min:.4},{max:.4}");
            rows.push(json!({
                "tau": tau,
                "method": method.to_string(),
                "sp_trimmed_mean": mean,
                "sp_min": min,
                "sp_max": max,
                "spread": max - min,
                "converged": sp.len(),
                "failed": failed,
            }));
        }
    }
    write_out(&opts.out, "tau_sweep.csv", &csv)?;
    let summary = json!({
        "schema": "tau-sweep-v1",
        "grid": grid,
        "runs_per_point": opts.runs,
        "trim": opts.trim,
        "base_seed": opts.seed,
        "points": rows,
    });
    write_out(
        &opts.out,
        "tau_sweep.json",
        &serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(Outcome::Success)
}

/// Index of the run whose final cost sits at the median; the "representative
/// run" the per-run curve files get labeled with.
fn median_by_final_sp(results: &[RunResult64]) -> Option<usize> {
    let mut order: Vec<usize> = (0..results.len())
        .filter(|&i| results[i].status == RunStatus::Converged)
        .collect();
    if order.is_empty() {
        return None;
    }
    order.sort_by(|&a, &b| {
        results[a]
            .counters
            .sp_normalized()
            .partial_cmp(&results[b].counters.sp_normalized())
            .unwrap()
    });
    Some(order[order.len() / 2])
}

/// `curves`: per-iteration training error against iterations and cumulative
/// normalized scalar products, for every run, plus the median-cost pick.
pub fn cmd_curves(opts: &Options) -> Result<Outcome> {
    let objective = load_objective(opts)?;
    let full = objective.component_count();

    // Reference optimum from the full-sample method at the tight tolerance.
    let reference = run_full(
        &objective,
        LineSearchParams::default(),
        StopRule::GradNorm {
            eps: 1e-7,
            require_full: true,
        },
        &zero_start(&objective),
    );
    if reference.status != RunStatus::Converged {
        eprintln!(
            "reference full-sample run did not converge: {}",
            status_str(reference.status)
        );
        return Ok(Outcome::DeclaredFailure);
    }
    let f_star = objective.full_value_raw(&reference.x);

    let mut csv = String::from("# subspectral curves-v1\nmethod,run,k,n_k,cum_sp,train_error\n");
    let mut picks = Vec::new();
    for &method in &opts.methods {
        let mut m_opts = opts.clone();
        m_opts.diagnostics = true;
        if method == MethodName::SgFull {
            m_opts.runs = 1; // deterministic, one run carries all information
        }
        let config = solver_config_for(&m_opts, method, full, grad_stop(opts));
        let results = run_batch(&objective, &config, &m_opts);
        for (i, r) in results.iter().enumerate() {
            for rec in &r.trace {
                let err = rec.diagnostics.as_ref().expect("diagnostics on").f_full - f_star;
                let cum_sp = rec.sp as f64 / full as f64;
                let _ = writeln!(
                    csv,
                    "{method},{i},{},{},{cum_sp},{err}",
                    rec.k, rec.sample_size
                );
            }
        }
        let pick = median_by_final_sp(&results);
        picks.push(json!({
            "method": method.to_string(),
            "runs": results.len(),
            "representative_run": pick,
        }));
    }
    write_out(&opts.out, "curves.csv", &csv)?;
    let summary = json!({
        "schema": "curves-v1",
        "f_star": f_star,
        "reference_iterations": reference.iterations(),
        "base_seed": opts.seed,
        "representatives": picks,
    });
    write_out(
        &opts.out,
        "curves.json",
        &serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(Outcome::Success)
}

/// `valstop`: subsampled methods under the validation-stall rule, plus the
/// full-sample gradient-norm reference for comparison.
pub fn cmd_valstop(opts: &Options) -> Result<Outcome> {
    let objective = load_objective(opts)?;
    let full = objective.component_count();
    if objective.split().validation().is_empty() {
        bail!("valstop needs a validation split; lower --train-fraction below 1");
    }

    let mut csv = String::from("# subspectral valstop-v1\nmethod,run,k,n_k,cum_sp,val_loss\n");
    let mut summaries = Vec::new();

    let emit = |method: MethodName, results: &[RunResult64], csv: &mut String| {
        for (i, r) in results.iter().enumerate() {
            for rec in &r.trace {
                let val = rec
                    .diagnostics
                    .as_ref()
                    .and_then(|d| d.val_loss)
                    .expect("diagnostics with validation split");
                let cum_sp = rec.sp as f64 / full as f64;
                let _ = writeln!(
                    csv,
                    "{method},{i},{},{},{cum_sp},{val}",
                    rec.k, rec.sample_size
                );
            }
        }
        let ok: Vec<&RunResult64> = results
            .iter()
            .filter(|r| r.status == RunStatus::Converged)
            .collect();
        let n = ok.len().max(1) as f64;
        let terminal = |f: &dyn Fn(&RunResult64) -> f64| ok.iter().map(|r| f(r)).sum::<f64>() / n;
        json!({
            "method": method.to_string(),
            "runs": results.len(),
            "converged": ok.len(),
            "mean_iterations": terminal(&|r| r.iterations() as f64),
            "mean_terminal_sample": terminal(&|r| r.trace.last().unwrap().sample_size as f64),
            "mean_terminal_val_loss": terminal(&|r| {
                r.trace
                    .last()
                    .unwrap()
                    .diagnostics
                    .as_ref()
                    .and_then(|d| d.val_loss)
                    .unwrap_or(f64::NAN)
            }),
            "representative_run": median_by_final_sp(results),
        })
    };

    for &method in &opts.methods {
        if method == MethodName::SgFull {
            continue; // the reference below covers it
        }
        let mut m_opts = opts.clone();
        m_opts.diagnostics = true;
        let config = solver_config_for(
            &m_opts,
            method,
            full,
            StopRule::validation_stall(opts.p),
        );
        let results = run_batch(&objective, &config, &m_opts);
        summaries.push(emit(method, &results, &mut csv));
    }

    // Full-sample reference stopped on the gradient norm.
    let mut ref_opts = opts.clone();
    ref_opts.diagnostics = true;
    ref_opts.runs = 1;
    let config = solver_config_for(&ref_opts, MethodName::SgFull, full, grad_stop(opts));
    let reference = run_batch(&objective, &config, &ref_opts);
    summaries.push(emit(MethodName::SgFull, &reference, &mut csv));
    let declared_failure = reference[0].status == RunStatus::LineSearchFailure;

    write_out(&opts.out, "valstop.csv", &csv)?;
    let summary = json!({
        "schema": "valstop-v1",
        "p": opts.p,
        "base_seed": opts.seed,
        "validation_count": objective.split().validation().len(),
        "methods": summaries,
    });
    write_out(
        &opts.out,
        "valstop.json",
        &serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(if declared_failure {
        Outcome::DeclaredFailure
    } else {
        Outcome::Success
    })
}
