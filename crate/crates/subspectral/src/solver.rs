//! The variable-sample spectral gradient driver.
//!
//! One iteration: fix the sample size from the schedule, generate the sample
//! according to the method (nested, non-nested, or the full set), evaluate
//! the sampled function and gradient at the current point, check the stop
//! rule, form the safeguarded BB coefficient from the previous step and the
//! method's gradient displacement, and backtrack along `d = −σ⁻¹g`.
//!
//! A failed line search below the full sample keeps the iterate (`α = 0`) and
//! lets the sample grow; at the full sample it terminates the run with
//! [`RunStatus::LineSearchFailure`].
//!
//! Evaluation policy: the sampled function and its cache are recomputed fresh
//! at the start of every iteration and the gradient reuses that cache, so an
//! iteration costs `N_k` scalar products up front plus `N_k` per line-search
//! trial, plus whatever the displacement variant pays. Accepted trial caches
//! are not carried across iterations.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::diagnostics::{eta_k, nu_k};
use crate::linalg;
use crate::linesearch::{backtrack, wolfe_check, LineSearchOutcome, LineSearchParams};
use crate::objective::{CostCounters, ExpCache, FiniteSumObjective, TagAllocator};
use crate::sampling::{
    intersection, next_nested, next_non_nested, GeometricSchedule, SampleSchedule, SampleSet,
};
use crate::spectral::{
    bb_coefficient, direction, displacement_y1_nested, displacement_y1_non_nested,
    displacement_y2, displacement_y3, ComponentGradients, SpectralState,
};
use crate::Scalar;

/// The five method variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum MethodName {
    #[serde(rename = "SG_N_1")]
    SgN1,
    #[serde(rename = "SG_N_2")]
    SgN2,
    #[serde(rename = "SG_I_1")]
    SgI1,
    #[serde(rename = "SG_I_3")]
    SgI3,
    #[serde(rename = "SGFull")]
    SgFull,
}

impl MethodName {
    pub const ALL: [MethodName; 5] = [
        MethodName::SgN1,
        MethodName::SgN2,
        MethodName::SgI1,
        MethodName::SgI3,
        MethodName::SgFull,
    ];

    /// Nested subsampling (`SG_N_*`)?
    pub fn is_nested(self) -> bool {
        matches!(self, MethodName::SgN1 | MethodName::SgN2)
    }

    /// Non-nested variants keep every component gradient of the previous
    /// sample so the displacement can read them back at zero cost.
    pub fn stores_component_gradients(self) -> bool {
        matches!(self, MethodName::SgI1 | MethodName::SgI3)
    }
}

impl fmt::Display for MethodName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MethodName::SgN1 => "SG_N_1",
            MethodName::SgN2 => "SG_N_2",
            MethodName::SgI1 => "SG_I_1",
            MethodName::SgI3 => "SG_I_3",
            MethodName::SgFull => "SGFull",
        };
        f.write_str(s)
    }
}

impl FromStr for MethodName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "SG_N_1" => Ok(MethodName::SgN1),
            "SG_N_2" => Ok(MethodName::SgN2),
            "SG_I_1" => Ok(MethodName::SgI1),
            "SG_I_3" => Ok(MethodName::SgI3),
            "SGFULL" => Ok(MethodName::SgFull),
            other => Err(format!(
                "unknown method `{other}` (expected SG_N_1, SG_N_2, SG_I_1, SG_I_3 or SGFull)"
            )),
        }
    }
}

/// Termination rule, applied at the start of every iteration once the sampled
/// gradient is known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum StopRule<T> {
    /// Stop when `‖∇f_{𝒩_k}(x_k)‖ ≤ eps`, and only once the full sample is
    /// reached when `require_full` is set.
    GradNorm { eps: T, require_full: bool },
    /// Stop when the validation loss grows by `growth_factor` or stalls
    /// within `rel_tol` relative change, provided `N_k ≥ p·N`.
    ValidationStall { p: T, growth_factor: T, rel_tol: T },
    /// Stop unconditionally at iteration `limit`.
    MaxIter { limit: usize },
}

impl<T: Scalar> StopRule<T> {
    /// Default validation rule: 10% growth or 0.1% relative stall.
    pub fn validation_stall(p: T) -> Self {
        StopRule::ValidationStall {
            p,
            growth_factor: T::from_f64(1.1).unwrap(),
            rel_tol: T::from_f64(1e-3).unwrap(),
        }
    }
}

/// Everything a stop rule may look at.
#[derive(Debug, Clone, Copy)]
pub struct StopContext<T> {
    pub k: usize,
    pub sample_size: usize,
    pub full_size: usize,
    pub grad_norm_sampled: T,
    pub val_loss: Option<T>,
    pub prev_val_loss: Option<T>,
}

/// Pure stop predicate.
pub fn evaluate_stop<T: Scalar>(rule: &StopRule<T>, ctx: &StopContext<T>) -> bool {
    match *rule {
        StopRule::GradNorm { eps, require_full } => {
            ctx.grad_norm_sampled <= eps && (!require_full || ctx.sample_size == ctx.full_size)
        }
        StopRule::ValidationStall {
            p,
            growth_factor,
            rel_tol,
        } => {
            let size_ok = T::from_count(ctx.sample_size) >= p * T::from_count(ctx.full_size);
            match (ctx.val_loss, ctx.prev_val_loss) {
                (Some(cur), Some(prev)) => {
                    size_ok
                        && (cur > growth_factor * prev
                            || (prev - cur).abs() < rel_tol * cur.abs())
                }
                _ => false,
            }
        }
        StopRule::MaxIter { limit } => ctx.k >= limit,
    }
}

/// Solver configuration; the schedule type is pluggable, geometric with a cap
/// by default.
#[derive(Debug, Clone)]
pub struct SolverConfig<T, S = GeometricSchedule> {
    pub method: MethodName,
    pub schedule: S,
    pub line_search: LineSearchParams<T>,
    pub stop: StopRule<T>,
    pub sigma_min: T,
    pub sigma_max: T,
    /// Safety net independent of the stop rule.
    pub max_iter: usize,
    /// Record full-sum values, approximation errors and the curvature check
    /// per iteration (counter-exempt work).
    pub diagnostics: bool,
}

impl<T: Scalar> SolverConfig<T> {
    pub fn new(method: MethodName, schedule: GeometricSchedule, stop: StopRule<T>) -> Self {
        SolverConfig {
            method,
            schedule,
            line_search: LineSearchParams::default(),
            stop,
            sigma_min: T::from_f64(1e-8).unwrap(),
            sigma_max: T::from_f64(1e8).unwrap(),
            max_iter: 10_000,
            diagnostics: false,
        }
    }
}

/// Counter-exempt per-iteration observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationDiagnostics<T> {
    /// `f_𝒩(x_k)`.
    pub f_full: T,
    /// `‖∇f_𝒩(x_k)‖`.
    pub grad_norm_full: T,
    /// Function approximation error `ν_k` over `(x_k, x_{k+1})`.
    pub nu: T,
    /// Squared-gradient-norm approximation error `η_k` over `(x_k, x_{k+1})`.
    pub eta: T,
    /// Validation loss at `x_k` when a validation split exists.
    pub val_loss: Option<T>,
    /// Curvature condition at the accepted step; `None` when no step was
    /// taken.
    pub wolfe_ok: Option<bool>,
}

/// One row of the run trace.
///
/// Rows with `sigma == 0` are terminal evaluation rows: the stop rule fired
/// after the iteration-start evaluation, before any step was formed. Rows
/// with `sigma > 0` and `alpha == 0` are failed line searches.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord<T> {
    pub k: usize,
    pub sample_size: usize,
    pub sigma: T,
    pub alpha: T,
    pub trials: usize,
    pub grad_norm_sampled: T,
    /// `f_{𝒩_k}(x_k)`.
    pub f_sampled: T,
    /// `f_{𝒩_k}(x_{k+1})`; equals `f_sampled` when no step was taken.
    pub f_accepted: T,
    /// `∇f_{𝒩_k}(x_k)ᵀ d_k`, for replaying the descent condition.
    pub g_dot_d: T,
    pub zeta: T,
    pub sp: u64,
    pub fe: u64,
    pub ge1: u64,
    pub ge2: u64,
    pub diagnostics: Option<IterationDiagnostics<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RunStatus {
    Converged,
    /// Declared only at the full sample; below it a failed search keeps the
    /// iterate and grows the sample instead.
    LineSearchFailure,
    MaxIter,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunResult<T> {
    pub method: MethodName,
    pub seed: u64,
    pub status: RunStatus,
    /// Final iterate.
    pub x: Vec<T>,
    pub trace: Vec<IterationRecord<T>>,
    pub counters: CostCounters,
}

impl<T: Scalar> RunResult<T> {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    /// Fraction of accepted steps whose curvature check passed, if the run
    /// recorded diagnostics.
    pub fn wolfe_rate(&self) -> Option<f64> {
        let flags: Vec<bool> = self
            .trace
            .iter()
            .filter_map(|r| r.diagnostics.as_ref().and_then(|d| d.wolfe_ok))
            .collect();
        if flags.is_empty() {
            None
        } else {
            Some(flags.iter().filter(|&&b| b).count() as f64 / flags.len() as f64)
        }
    }
}

struct Engine<'a, T, O, S> {
    objective: &'a O,
    config: &'a SolverConfig<T, S>,
    rng: ChaCha8Rng,
    tags: TagAllocator,
    counters: CostCounters,
    cache: ExpCache<T>,
    trial_cache: ExpCache<T>,
    old_point_cache: ExpCache<T>,
    x: Vec<T>,
    k: usize,
    state: Option<SpectralState<T>>,
    prev_val_loss: Option<T>,
    trace: Vec<IterationRecord<T>>,
}

enum StepOutcome {
    Continue,
    Stop(RunStatus),
}

impl<'a, T, O, S> Engine<'a, T, O, S>
where
    T: Scalar,
    O: FiniteSumObjective<T>,
    S: SampleSchedule,
{
    fn new(objective: &'a O, config: &'a SolverConfig<T, S>, x0: &[T], seed: u64) -> Self {
        assert_eq!(
            x0.len(),
            objective.dimension(),
            "start point dimension mismatch"
        );
        assert_eq!(
            config.schedule.full_size(),
            objective.component_count(),
            "schedule full size must match the component count"
        );
        config.line_search.validate();
        assert!(
            config.sigma_min > T::zero()
                && config.sigma_min < T::one()
                && config.sigma_max > T::one(),
            "need 0 < sigma_min < 1 < sigma_max"
        );
        let n_components = objective.component_count();
        Engine {
            objective,
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
            tags: TagAllocator::new(),
            counters: CostCounters::new(n_components),
            cache: ExpCache::new(n_components),
            trial_cache: ExpCache::new(n_components),
            old_point_cache: ExpCache::new(n_components),
            x: x0.to_vec(),
            k: 0,
            state: None,
            prev_val_loss: None,
            trace: Vec::new(),
        }
    }

    fn generate_sample(&mut self) -> SampleSet {
        let full = self.objective.component_count();
        if self.config.method == MethodName::SgFull {
            return SampleSet::full(full, self.k);
        }
        let target = self.config.schedule.size_at(self.k).min(full).max(1);
        match &self.state {
            None => SampleSet::draw(target, full, self.k, &mut self.rng),
            Some(state) => {
                // Step 1 of the framework: sizes never shrink.
                let target = target.max(state.prev_sample.len());
                if self.config.method.is_nested() {
                    next_nested(&state.prev_sample, target, full, self.k, &mut self.rng)
                        .expect("target <= full by construction")
                } else {
                    next_non_nested(&state.prev_sample, target, full, self.k, &mut self.rng)
                        .expect("target <= full by construction")
                }
            }
        }
    }

    fn displacement(&mut self, sample: &SampleSet, g: &[T]) -> Option<Vec<T>> {
        let state = self.state.as_ref()?;
        let y = match self.config.method {
            MethodName::SgFull | MethodName::SgN2 => displacement_y2(g, &state.prev_gradient),
            MethodName::SgN1 => {
                self.old_point_cache.set_point(self.tags.next_tag());
                displacement_y1_nested(
                    self.objective,
                    sample,
                    g,
                    state,
                    &mut self.old_point_cache,
                    &mut self.counters,
                )
            }
            MethodName::SgI1 => {
                self.old_point_cache.set_point(self.tags.next_tag());
                displacement_y1_non_nested(
                    self.objective,
                    sample,
                    g,
                    state,
                    &mut self.old_point_cache,
                    &mut self.counters,
                )
            }
            MethodName::SgI3 => {
                let overlap = intersection(&state.prev_sample, sample);
                displacement_y3(
                    self.objective,
                    &overlap,
                    &self.x,
                    state,
                    &mut self.cache,
                    &mut self.counters,
                )
            }
        };
        Some(y)
    }

    fn needs_val_loss(&self) -> bool {
        self.config.diagnostics || matches!(self.config.stop, StopRule::ValidationStall { .. })
    }

    fn step(&mut self) -> StepOutcome {
        let full = self.objective.component_count();
        let k = self.k;
        let sample = self.generate_sample();
        let n_k = sample.len();

        // Iteration-start evaluation: fresh cache, function first, gradient
        // reuses the scalar products.
        self.cache.set_point(self.tags.next_tag());
        let f_k = self
            .objective
            .sampled_value(sample.indices(), &self.x, &mut self.cache, &mut self.counters)
            .expect("samples are non-empty");
        let n = self.objective.dimension();
        let mut g = vec![T::zero(); n];
        let mut store: Option<Vec<T>> = self
            .config
            .method
            .stores_component_gradients()
            .then(Vec::new);
        self.objective
            .sampled_gradient_collect(
                sample.indices(),
                &self.x,
                &mut self.cache,
                &mut self.counters,
                &mut g,
                store.as_mut(),
            )
            .expect("samples are non-empty");
        let grad_norm = linalg::norm(&g);

        let val_loss = if self.needs_val_loss() {
            let v = self.objective.validation_loss_hook(&self.x);
            if v.is_none() && matches!(self.config.stop, StopRule::ValidationStall { .. }) {
                panic!("validation stall rule requires a validation split");
            }
            v
        } else {
            None
        };

        let start_diag = if self.config.diagnostics {
            let f_full = self.objective.full_value_raw(&self.x);
            let g_full = self.objective.full_gradient_raw(&self.x);
            Some((f_full, linalg::norm(&g_full)))
        } else {
            None
        };

        let ctx = StopContext {
            k,
            sample_size: n_k,
            full_size: full,
            grad_norm_sampled: grad_norm,
            val_loss,
            prev_val_loss: self.prev_val_loss,
        };
        let rule_hit = evaluate_stop(&self.config.stop, &ctx);
        let safety_hit = k >= self.config.max_iter;
        if rule_hit || safety_hit {
            let status = if rule_hit {
                match self.config.stop {
                    StopRule::MaxIter { .. } => RunStatus::MaxIter,
                    _ => RunStatus::Converged,
                }
            } else {
                RunStatus::MaxIter
            };
            let diagnostics = start_diag.map(|(f_full, grad_norm_full)| IterationDiagnostics {
                f_full,
                grad_norm_full,
                nu: nu_k(self.objective, sample.indices(), &self.x, &self.x),
                eta: eta_k(self.objective, sample.indices(), &self.x, &self.x),
                val_loss,
                wolfe_ok: None,
            });
            self.trace.push(IterationRecord {
                k,
                sample_size: n_k,
                sigma: T::zero(),
                alpha: T::zero(),
                trials: 0,
                grad_norm_sampled: grad_norm,
                f_sampled: f_k,
                f_accepted: f_k,
                g_dot_d: T::zero(),
                zeta: self.config.line_search.zeta(k),
                sp: self.counters.sp,
                fe: self.counters.fe,
                ge1: self.counters.ge1,
                ge2: self.counters.ge2,
                diagnostics,
            });
            return StepOutcome::Stop(status);
        }

        // Spectral coefficient from the previous step and the method's
        // displacement; the first iteration starts from sigma = 1.
        let sigma = match self.displacement(&sample, &g) {
            Some(y) => {
                let state = self.state.as_ref().expect("displacement implies state");
                let s = linalg::sub(&self.x, &state.prev_point);
                bb_coefficient(&s, &y, self.config.sigma_min, self.config.sigma_max)
            }
            None => T::one(),
        };
        let d = direction(sigma, &g);
        let g_dot_d = linalg::dot(&g, &d);
        let zeta_k = self.config.line_search.zeta(k);

        let tags = &mut self.tags;
        let outcome = backtrack(
            self.objective,
            sample.indices(),
            &self.x,
            &d,
            g_dot_d,
            f_k,
            zeta_k,
            &self.config.line_search,
            &mut self.trial_cache,
            &mut self.counters,
            || tags.next_tag(),
        );

        let (alpha, trials, f_next, x_next, failed_at_full) = match outcome {
            LineSearchOutcome::Accepted(step) => {
                (step.alpha, step.trials, step.f_new, step.x_new, false)
            }
            LineSearchOutcome::Failure { trials } => {
                let at_full = n_k == full;
                (T::zero(), trials, f_k, self.x.clone(), at_full)
            }
        };

        let diagnostics = start_diag.map(|(f_full, grad_norm_full)| {
            let wolfe_ok = if alpha > T::zero() {
                Some(wolfe_check(
                    self.objective,
                    sample.indices(),
                    &x_next,
                    &d,
                    g_dot_d,
                    self.config.line_search.c2,
                ))
            } else {
                None
            };
            IterationDiagnostics {
                f_full,
                grad_norm_full,
                nu: nu_k(self.objective, sample.indices(), &self.x, &x_next),
                eta: eta_k(self.objective, sample.indices(), &self.x, &x_next),
                val_loss,
                wolfe_ok,
            }
        });

        self.trace.push(IterationRecord {
            k,
            sample_size: n_k,
            sigma,
            alpha,
            trials,
            grad_norm_sampled: grad_norm,
            f_sampled: f_k,
            f_accepted: f_next,
            g_dot_d,
            zeta: zeta_k,
            sp: self.counters.sp,
            fe: self.counters.fe,
            ge1: self.counters.ge1,
            ge2: self.counters.ge2,
            diagnostics,
        });

        if failed_at_full {
            return StepOutcome::Stop(RunStatus::LineSearchFailure);
        }

        let component_gradients =
            store.map(|data| ComponentGradients::new(sample.indices().to_vec(), data, n));
        let prev_point = std::mem::replace(&mut self.x, x_next);
        self.state = Some(SpectralState {
            prev_point,
            prev_gradient: g,
            prev_sample: sample,
            component_gradients,
        });
        self.prev_val_loss = val_loss;
        self.k += 1;
        StepOutcome::Continue
    }

    fn finish(mut self) -> RunResult<T> {
        loop {
            match self.step() {
                StepOutcome::Continue => {}
                StepOutcome::Stop(status) => {
                    debug_assert!(self.counters.identity_holds());
                    return RunResult {
                        method: self.config.method,
                        seed: 0,
                        status,
                        x: self.x,
                        trace: self.trace,
                        counters: self.counters,
                    };
                }
            }
        }
    }
}

/// Runs one seeded optimization to termination.
pub fn run<T, O, S>(objective: &O, config: &SolverConfig<T, S>, x0: &[T], seed: u64) -> RunResult<T>
where
    T: Scalar,
    O: FiniteSumObjective<T>,
    S: SampleSchedule,
{
    let engine = Engine::new(objective, config, x0, seed);
    let mut result = engine.finish();
    result.seed = seed;
    result
}

/// The full-sample special case: no sampler, no randomness.
pub fn run_full<T, O>(
    objective: &O,
    line_search: LineSearchParams<T>,
    stop: StopRule<T>,
    x0: &[T],
) -> RunResult<T>
where
    T: Scalar,
    O: FiniteSumObjective<T>,
{
    let mut config = SolverConfig::new(
        MethodName::SgFull,
        GeometricSchedule::full_only(objective.component_count()),
        stop,
    );
    config.line_search = line_search;
    run(objective, &config, x0, 0)
}

/// Zero start point matching the objective's dimension; makes the logistic
/// loss exactly `log 2` at `x_0`.
pub fn zero_start<T: Scalar, O: FiniteSumObjective<T>>(objective: &O) -> Vec<T> {
    vec![T::zero(); objective.dimension()]
}
