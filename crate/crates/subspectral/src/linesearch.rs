//! Nonmonotone backtracking line search.
//!
//! An accepted step satisfies
//!
//! ```text
//! f_S(x + α d) ≤ f_S(x) + c₁ α gᵀd + ζ_k
//! ```
//!
//! with the summable slack `ζ_k = scale · k^(-exponent)`. Trials run down the
//! ladder `α = βʲ` for `j = 0, 1, …, j_max`; if none is accepted the search
//! reports failure and the caller decides (grow the sample, or declare
//! failure at the full sample). The curvature condition is never enforced,
//! only checked after the fact as a diagnostic.

use crate::objective::{CostCounters, ExpCache, FiniteSumObjective, PointTag};
use crate::Scalar;

/// Backtracking and slack-sequence parameters.
#[derive(Debug, Clone, Copy)]
pub struct LineSearchParams<T> {
    /// Sufficient-decrease constant, `0 < c₁ ≤ c₂ < 1`.
    pub c1: T,
    /// Curvature constant; diagnostic only.
    pub c2: T,
    /// Backtracking ratio, `0 < β < 1`.
    pub beta: T,
    /// Largest backtracking exponent; trials are `β⁰ … β^{j_max}`.
    pub j_max: usize,
    /// Slack scale; `ζ_k = zeta_scale · k^(−zeta_exponent)` for `k ≥ 1` and
    /// `ζ_0 = zeta_scale`.
    pub zeta_scale: T,
    /// Must exceed 1 so that `Σ ζ_k < ∞`.
    pub zeta_exponent: T,
}

impl<T: Scalar> Default for LineSearchParams<T> {
    fn default() -> Self {
        LineSearchParams {
            c1: T::from_f64(1e-4).unwrap(),
            c2: T::from_f64(0.9).unwrap(),
            beta: T::from_f64(0.5).unwrap(),
            j_max: 15,
            zeta_scale: T::from_f64(100.0).unwrap(),
            zeta_exponent: T::from_f64(1.1).unwrap(),
        }
    }
}

impl<T: Scalar> LineSearchParams<T> {
    pub fn validate(&self) {
        assert!(
            self.c1 > T::zero() && self.c1 <= self.c2 && self.c2 < T::one(),
            "need 0 < c1 <= c2 < 1"
        );
        assert!(
            self.beta > T::zero() && self.beta < T::one(),
            "need 0 < beta < 1"
        );
        assert!(self.j_max >= 1, "need at least two trials");
        assert!(self.zeta_scale >= T::zero(), "slack scale must be nonnegative");
        assert!(
            self.zeta_exponent > T::one(),
            "slack exponent must exceed 1 for summability"
        );
    }

    /// `ζ_k`. The power rule is undefined at `k = 0`; the sequence starts at
    /// the same value as `ζ_1`, which preserves summability.
    pub fn zeta(&self, k: usize) -> T {
        if k == 0 {
            self.zeta_scale
        } else {
            self.zeta_scale * T::from_count(k).powf(-self.zeta_exponent)
        }
    }

    /// Closed-form upper bound on `Σ_{k≥1} ζ_k` by integral comparison:
    /// `scale · (1 + 1/(exponent − 1))`.
    pub fn zeta_sum_bound(&self) -> T {
        self.zeta_scale * (T::one() + (self.zeta_exponent - T::one()).recip())
    }
}

/// A step accepted by [`backtrack`].
#[derive(Debug)]
pub struct AcceptedStep<T> {
    pub alpha: T,
    /// Number of trials performed, in `1..=j_max+1`.
    pub trials: usize,
    /// `f_S(x + α d)`, the sampled value at the accepted point.
    pub f_new: T,
    /// The accepted point itself.
    pub x_new: Vec<T>,
    /// Point tag of the accepted trial; the trial cache passed to
    /// `backtrack` holds this point's entries for gradient reuse.
    pub point: PointTag,
}

/// Outcome of the backtracking loop.
#[derive(Debug)]
pub enum LineSearchOutcome<T> {
    Accepted(AcceptedStep<T>),
    /// No trial satisfied the descent condition; `trials = j_max + 1`.
    Failure { trials: usize },
}

/// Runs the trial ladder `α = βʲ`, `j = 0..=j_max`, accepting the first α
/// that satisfies the nonmonotone descent condition. Each trial evaluates
/// `f_S` at a fresh point tag (`SP += |S|`, `FE += |S|`); on acceptance the
/// trial cache is left pointing at the accepted point so the caller may reuse
/// its scalar products.
#[allow(clippy::too_many_arguments)]
pub fn backtrack<T, O>(
    objective: &O,
    sample: &[usize],
    x: &[T],
    d: &[T],
    g_dot_d: T,
    f_x: T,
    zeta_k: T,
    params: &LineSearchParams<T>,
    trial_cache: &mut ExpCache<T>,
    counters: &mut CostCounters,
    mut next_tag: impl FnMut() -> PointTag,
) -> LineSearchOutcome<T>
where
    T: Scalar,
    O: FiniteSumObjective<T>,
{
    let mut x_trial = vec![T::zero(); x.len()];
    for j in 0..=params.j_max {
        let alpha = params.beta.powi(j as i32);
        for (t, (xi, di)) in x_trial.iter_mut().zip(x.iter().zip(d.iter())) {
            *t = *xi + alpha * *di;
        }
        let tag = next_tag();
        trial_cache.set_point(tag);
        let f_trial = objective
            .sampled_value(sample, &x_trial, trial_cache, counters)
            .expect("line search sample is non-empty");
        if f_trial <= f_x + params.c1 * alpha * g_dot_d + zeta_k {
            return LineSearchOutcome::Accepted(AcceptedStep {
                alpha,
                trials: j + 1,
                f_new: f_trial,
                x_new: x_trial,
                point: tag,
            });
        }
    }
    LineSearchOutcome::Failure {
        trials: params.j_max + 1,
    }
}

/// Diagnostic check of the curvature condition
/// `∇f_S(x + α d)ᵀ d ≥ c₂ gᵀd` at an accepted step. Counter-exempt; never
/// affects control flow.
pub fn wolfe_check<T, O>(
    objective: &O,
    sample: &[usize],
    x_new: &[T],
    d: &[T],
    g_dot_d: T,
    c2: T,
) -> bool
where
    T: Scalar,
    O: FiniteSumObjective<T>,
{
    let mut g_new = vec![T::zero(); x_new.len()];
    objective
        .sampled_gradient_raw_into(sample, x_new, &mut g_new)
        .expect("sample non-empty");
    crate::linalg::dot(&g_new, d) >= c2 * g_dot_d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::TagAllocator;

    /// Single-component objective `f(x) = x²/2` following the same
    /// cache/counter discipline as the logistic instance.
    struct Quadratic1D;

    impl FiniteSumObjective<f64> for Quadratic1D {
        fn dimension(&self) -> usize {
            1
        }
        fn component_count(&self) -> usize {
            1
        }
        fn component_value(
            &self,
            j: usize,
            x: &[f64],
            cache: &mut ExpCache<f64>,
            counters: &mut CostCounters,
        ) -> f64 {
            if cache.get(j).is_none() {
                cache.insert(j, x[0]);
                counters.sp += 1;
            }
            counters.fe += 1;
            0.5 * x[0] * x[0]
        }
        fn component_gradient_into(
            &self,
            j: usize,
            x: &[f64],
            cache: &mut ExpCache<f64>,
            counters: &mut CostCounters,
            out: &mut [f64],
        ) {
            if cache.get(j).is_none() {
                cache.insert(j, x[0]);
                counters.sp += 1;
                counters.ge1 += 1;
            }
            counters.ge2 += 1;
            out[0] = x[0];
        }
        fn component_value_raw(&self, _j: usize, x: &[f64]) -> f64 {
            0.5 * x[0] * x[0]
        }
        fn component_gradient_raw_into(&self, _j: usize, x: &[f64], out: &mut [f64]) {
            out[0] = x[0];
        }
    }

    #[test]
    fn zeta_examples() {
        let p = LineSearchParams::<f64>::default();
        assert_eq!(p.zeta(1), 100.0);
        assert!((p.zeta(2) - 46.651_649_576_840_37).abs() < 1e-12);
        assert_eq!(p.zeta(0), 100.0);
        assert!((p.zeta_sum_bound() - 1100.0).abs() < 1e-9);
    }

    #[test]
    fn zeta_partial_sums_stay_below_the_integral_bound() {
        let p = LineSearchParams::<f64>::default();
        let mut sum = 0.0;
        let mut prev = f64::INFINITY;
        for k in 1..=100_000usize {
            let z = p.zeta(k);
            assert!(z <= prev, "monotone decreasing");
            prev = z;
            sum += z;
        }
        assert!(sum < p.zeta_sum_bound(), "partial sum {sum}");
    }

    #[test]
    fn quadratic_accepts_unit_step() {
        // x = 1, d = -1, ζ = 0: f(0) = 0 ≤ 0.5 − 1e-4, so α = 1 on trial 1.
        let obj = Quadratic1D;
        let params = LineSearchParams::default();
        let mut tags = TagAllocator::new();
        let mut cache = ExpCache::new(1);
        let mut counters = CostCounters::new(1);
        let out = backtrack(
            &obj,
            &[0],
            &[1.0],
            &[-1.0],
            -1.0,
            0.5,
            0.0,
            &params,
            &mut cache,
            &mut counters,
            || tags.next_tag(),
        );
        match out {
            LineSearchOutcome::Accepted(step) => {
                assert_eq!(step.alpha, 1.0);
                assert_eq!(step.trials, 1);
                assert_eq!(step.f_new, 0.0);
                assert_eq!(step.x_new, vec![0.0]);
            }
            LineSearchOutcome::Failure { .. } => panic!("should accept"),
        }
        assert_eq!(counters.fe, 1);
        assert_eq!(counters.sp, 1);
    }

    #[test]
    fn huge_slack_accepts_immediately_even_uphill() {
        let obj = Quadratic1D;
        let params = LineSearchParams::default();
        let mut tags = TagAllocator::new();
        let mut cache = ExpCache::new(1);
        let mut counters = CostCounters::new(1);
        let out = backtrack(
            &obj,
            &[0],
            &[1.0],
            &[1.0],
            1.0,
            0.5,
            1e6,
            &params,
            &mut cache,
            &mut counters,
            || tags.next_tag(),
        );
        assert!(matches!(
            out,
            LineSearchOutcome::Accepted(AcceptedStep { alpha, trials: 1, .. }) if alpha == 1.0
        ));
    }

    #[test]
    fn ascent_direction_with_zero_slack_fails_after_all_trials() {
        let obj = Quadratic1D;
        let params = LineSearchParams::default();
        let mut tags = TagAllocator::new();
        let mut cache = ExpCache::new(1);
        let mut counters = CostCounters::new(1);
        let out = backtrack(
            &obj,
            &[0],
            &[1.0],
            &[1.0],
            1.0,
            0.5,
            0.0,
            &params,
            &mut cache,
            &mut counters,
            || tags.next_tag(),
        );
        match out {
            LineSearchOutcome::Failure { trials } => assert_eq!(trials, params.j_max + 1),
            LineSearchOutcome::Accepted(_) => panic!("uphill with zero slack cannot pass"),
        }
        assert_eq!(counters.fe as usize, params.j_max + 1);
    }

    #[test]
    fn accepted_alpha_lies_on_the_trial_ladder() {
        // Steep quadratic forces several backtracks: f(x) = 50 x², x = 1,
        // d = -100 x (a badly scaled direction).
        struct Steep;
        impl FiniteSumObjective<f64> for Steep {
            fn dimension(&self) -> usize {
                1
            }
            fn component_count(&self) -> usize {
                1
            }
            fn component_value(
                &self,
                j: usize,
                x: &[f64],
                cache: &mut ExpCache<f64>,
                counters: &mut CostCounters,
            ) -> f64 {
                if cache.get(j).is_none() {
                    cache.insert(j, x[0]);
                    counters.sp += 1;
                }
                counters.fe += 1;
                50.0 * x[0] * x[0]
            }
            fn component_gradient_into(
                &self,
                _j: usize,
                x: &[f64],
                _cache: &mut ExpCache<f64>,
                _counters: &mut CostCounters,
                out: &mut [f64],
            ) {
                out[0] = 100.0 * x[0];
            }
            fn component_value_raw(&self, _j: usize, x: &[f64]) -> f64 {
                50.0 * x[0] * x[0]
            }
            fn component_gradient_raw_into(&self, _j: usize, x: &[f64], out: &mut [f64]) {
                out[0] = 100.0 * x[0];
            }
        }
        let params = LineSearchParams::default();
        let mut tags = TagAllocator::new();
        let mut cache = ExpCache::new(1);
        let mut counters = CostCounters::new(1);
        let out = backtrack(
            &Steep,
            &[0],
            &[1.0],
            &[-100.0],
            -100.0,
            50.0,
            0.0,
            &params,
            &mut cache,
            &mut counters,
            || tags.next_tag(),
        );
        match out {
            LineSearchOutcome::Accepted(step) => {
                let j = (step.trials - 1) as i32;
                assert_eq!(step.alpha, 0.5f64.powi(j));
                assert!(step.trials >= 2, "unit step should be rejected");
                assert!(step.trials <= params.j_max + 1);
            }
            LineSearchOutcome::Failure { .. } => panic!("a small enough step exists"),
        }
    }

    #[test]
    fn wolfe_check_sign_cases() {
        let obj = Quadratic1D;
        // x = 1, d = -1; α at the 1-D minimizer (α = 1, new x = 0):
        // ∇f(0)ᵀd = 0 ≥ c₂·(−1) → true.
        assert!(wolfe_check(&obj, &[0], &[0.0], &[-1.0], -1.0, 0.9));
        // Tiny α (new x = 0.99): ∇f(0.99)ᵀd = −0.99 < −0.9 → false.
        assert!(!wolfe_check(&obj, &[0], &[0.99], &[-1.0], -1.0, 0.9));
    }

    #[test]
    #[should_panic(expected = "summability")]
    fn zeta_exponent_at_most_one_is_rejected() {
        let mut p = LineSearchParams::<f64>::default();
        p.zeta_exponent = 1.0;
        p.validate();
    }
}
