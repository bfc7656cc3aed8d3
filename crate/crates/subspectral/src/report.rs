//! Trace and summary serialization.
//!
//! Trace CSV columns (schema `trace-v1`):
//!
//! ```text
//! k,n_k,sigma,alpha,trials,grad_norm_sampled,f_sampled,zeta,sp,fe,ge1,ge2
//! ```
//!
//! with `f_full,grad_norm_full,nu,eta,val_loss` appended when the run was
//! recorded with diagnostics. Floats are printed with Rust's shortest
//! round-trip formatting, so identical runs produce byte-identical files.

use std::fmt::Write as _;

use serde_json::json;

use crate::objective::CostCounters;
use crate::solver::{IterationRecord, RunResult, RunStatus};
use crate::Scalar;

pub const TRACE_SCHEMA: &str = "trace-v1";

/// Renders a run trace as CSV with a versioned comment header.
pub fn trace_to_csv<T: Scalar>(trace: &[IterationRecord<T>], diagnostics: bool) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# subspectral {TRACE_SCHEMA}");
    let base = "k,n_k,sigma,alpha,trials,grad_norm_sampled,f_sampled,zeta,sp,fe,ge1,ge2";
    if diagnostics {
        let _ = writeln!(out, "{base},f_full,grad_norm_full,nu,eta,val_loss");
    } else {
        let _ = writeln!(out, "{base}");
    }
    for r in trace {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.k,
            r.sample_size,
            r.sigma,
            r.alpha,
            r.trials,
            r.grad_norm_sampled,
            r.f_sampled,
            r.zeta,
            r.sp,
            r.fe,
            r.ge1,
            r.ge2
        );
        if diagnostics {
            match &r.diagnostics {
                Some(d) => {
                    let _ = write!(out, ",{},{},{},{}", d.f_full, d.grad_norm_full, d.nu, d.eta);
                    match d.val_loss {
                        Some(v) => {
                            let _ = write!(out, ",{v}");
                        }
                        None => out.push(','),
                    }
                }
                None => out.push_str(",,,,,"),
            }
        }
        out.push('\n');
    }
    out
}

pub fn status_str(status: RunStatus) -> &'static str {
    match status {
        RunStatus::Converged => "Converged",
        RunStatus::LineSearchFailure => "LineSearchFailure",
        RunStatus::MaxIter => "MaxIter",
    }
}

fn counters_json(c: &CostCounters) -> serde_json::Value {
    json!({
        "raw": { "sp": c.sp, "fe": c.fe, "ge1": c.ge1, "ge2": c.ge2 },
        "normalized": {
            "sp": c.sp_normalized(),
            "fe": c.fe_normalized(),
            "ge1": c.ge1_normalized(),
            "ge2": c.ge2_normalized(),
        },
        "normalizer": c.normalizer,
    })
}

/// Per-run summary with final state and both raw and normalized costs.
pub fn run_summary_json<T: Scalar>(result: &RunResult<T>) -> serde_json::Value {
    let last = result.trace.last();
    json!({
        "schema": "run-summary-v1",
        "method": result.method.to_string(),
        "seed": result.seed,
        "status": status_str(result.status),
        "iterations": result.iterations(),
        "final": {
            "sample_size": last.map(|r| r.sample_size),
            "grad_norm_sampled": last.map(|r| r.grad_norm_sampled.to_f64()),
            "f_sampled": last.map(|r| r.f_sampled.to_f64()),
            "val_loss": last
                .and_then(|r| r.diagnostics.as_ref())
                .and_then(|d| d.val_loss)
                .map(|v| v.to_f64()),
        },
        "counters": counters_json(&result.counters),
        "wolfe_rate": result.wolfe_rate(),
    })
}
