//! Convergence-theory quantities measured on runs: approximation errors,
//! the worst-case iteration bound, R-linear fits of the optimality gap, and
//! an independent finite-difference gradient oracle.
//!
//! Everything here is counter-exempt: it measures the run, it is not part of
//! the algorithm's cost.

use serde::Serialize;
use thiserror::Error;

use crate::linalg;
use crate::objective::FiniteSumObjective;
use crate::solver::IterationRecord;
use crate::Scalar;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DiagnosticsError {
    #[error("need at least {needed} usable points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("trace was recorded without diagnostics")]
    MissingDiagnostics,
}

/// Constants of the descent-chain analysis.
///
/// `C = −c₁(c₂−1)/L = c₁(1−c₂)/L` is the guaranteed per-iteration decrease
/// factor in front of `‖∇f_{𝒩_k}‖²`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TheoryConstants<T> {
    /// Lipschitz bound on the component gradients.
    pub lipschitz: T,
    /// Strong-convexity constant (0 when unavailable).
    pub strong_convexity: T,
    /// Descent factor `c₁(1−c₂)/L`.
    pub c_factor: T,
}

impl<T: Scalar> TheoryConstants<T> {
    pub fn new(c1: T, c2: T, lipschitz: T, strong_convexity: T) -> Self {
        assert!(c1 > T::zero() && c1 <= c2 && c2 < T::one());
        assert!(lipschitz > T::zero());
        TheoryConstants {
            lipschitz,
            strong_convexity,
            c_factor: c1 * (T::one() - c2) / lipschitz,
        }
    }
}

/// Function approximation error
/// `ν_k = max(|f_S(x_k) − f_N(x_k)|, |f_S(x_{k+1}) − f_N(x_{k+1})|)`.
pub fn nu_k<T, O>(objective: &O, sample: &[usize], x_k: &[T], x_next: &[T]) -> T
where
    T: Scalar,
    O: FiniteSumObjective<T> + ?Sized,
{
    let at = |x: &[T]| {
        let sampled = objective.sampled_value_raw(sample, x).expect("non-empty");
        (sampled - objective.full_value_raw(x)).abs()
    };
    at(x_k).max(at(x_next))
}

/// Squared-gradient-norm approximation error
/// `η_k = max over both points of | ‖∇f_N‖² − ‖∇f_S‖² |`.
pub fn eta_k<T, O>(objective: &O, sample: &[usize], x_k: &[T], x_next: &[T]) -> T
where
    T: Scalar,
    O: FiniteSumObjective<T> + ?Sized,
{
    let n = objective.dimension();
    let mut g = vec![T::zero(); n];
    let mut at = |x: &[T]| {
        objective
            .sampled_gradient_raw_into(sample, x, &mut g)
            .expect("non-empty");
        let sampled_sq = linalg::norm_sq(&g);
        let full_sq = linalg::norm_sq(&objective.full_gradient_raw(x));
        (full_sq - sampled_sq).abs()
    };
    let a = at(x_k);
    let b = at(x_next);
    a.max(b)
}

/// Central-difference gradient of component `j`, evaluated without the
/// analytic gradient path. With `h = 1e-6 (1 + ‖x‖)` the logistic components
/// agree with the analytic gradient to about 1e-6 relative error.
pub fn fd_gradient<T, O>(objective: &O, j: usize, x: &[T], h: T) -> Vec<T>
where
    T: Scalar,
    O: FiniteSumObjective<T> + ?Sized,
{
    assert!(h > T::zero());
    let two_h = h + h;
    let mut out = vec![T::zero(); x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let plus = objective.component_value_raw(j, &probe);
        probe[i] = x[i] - h;
        let minus = objective.component_value_raw(j, &probe);
        probe[i] = x[i];
        out[i] = (plus - minus) / two_h;
    }
    out
}

/// Step size for [`fd_gradient`] scaled to the point.
pub fn fd_step<T: Scalar>(x: &[T]) -> T {
    T::from_f64(1e-6).unwrap() * (T::one() + linalg::norm(x))
}

/// Worst-case iteration count to drive `‖∇f_{𝒩_k}‖` below `eps`:
/// `⌈(f₀ − f* + ζ̄ + 2ν̄) / (C ε²)⌉`.
pub fn complexity_bound<T: Scalar>(
    eps: T,
    f0: T,
    f_star: T,
    zeta_bar: T,
    nu_bar: T,
    c_factor: T,
) -> u64 {
    assert!(eps > T::zero() && c_factor > T::zero());
    let raw = (f0 - f_star + zeta_bar + nu_bar + nu_bar) / (c_factor * eps * eps);
    let ceil = raw.ceil();
    if ceil <= T::zero() {
        0
    } else {
        ceil.to_u64().unwrap_or(u64::MAX)
    }
}

/// Least-squares fit of `log(gap_k)` against the in-slice iteration index.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RLinearFit<T> {
    /// Estimated per-iteration contraction factor `exp(slope)`.
    pub rho: T,
    /// Coefficient of determination of the log-linear fit.
    pub r_squared: T,
    /// Number of positive gaps the fit used.
    pub used: usize,
}

/// Fits the decay rate of an optimality-gap sequence. Non-positive gaps are
/// dropped (they carry no information on a log scale); at least 10 must
/// survive.
pub fn rlinear_fit<T: Scalar>(gaps: &[T]) -> Result<RLinearFit<T>, DiagnosticsError> {
    let pts: Vec<(T, T)> = gaps
        .iter()
        .enumerate()
        .filter(|(_, g)| **g > T::zero())
        .map(|(k, g)| (T::from_count(k), g.ln()))
        .collect();
    if pts.len() < 10 {
        return Err(DiagnosticsError::InsufficientData {
            needed: 10,
            got: pts.len(),
        });
    }
    let n = T::from_count(pts.len());
    let mean_x = pts.iter().map(|p| p.0).fold(T::zero(), |a, b| a + b) / n;
    let mean_y = pts.iter().map(|p| p.1).fold(T::zero(), |a, b| a + b) / n;
    let mut sxy = T::zero();
    let mut sxx = T::zero();
    for &(x, y) in &pts {
        sxy = sxy + (x - mean_x) * (y - mean_y);
        sxx = sxx + (x - mean_x) * (x - mean_x);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let mut ss_res = T::zero();
    let mut ss_tot = T::zero();
    for &(x, y) in &pts {
        let fit = slope * x + intercept;
        ss_res = ss_res + (y - fit) * (y - fit);
        ss_tot = ss_tot + (y - mean_y) * (y - mean_y);
    }
    let r_squared = if ss_tot == T::zero() {
        T::one()
    } else {
        T::one() - ss_res / ss_tot
    };
    Ok(RLinearFit {
        rho: slope.exp(),
        r_squared,
        used: pts.len(),
    })
}

/// Per-iteration verification of the descent chain
/// `f_N(x_{k+1}) ≤ f_N(x_k) − C‖∇f_{𝒩_k}(x_k)‖² + ζ_k + 2ν_k`.
///
/// The inequality is derived under the curvature condition, which the solver
/// only checks, never enforces, so this is a report, not an assertion.
#[derive(Debug, Clone, Serialize)]
pub struct DescentChainReport<T> {
    pub checked: usize,
    /// `(k, violation margin)` for every step where the chain failed.
    pub violations: Vec<(usize, T)>,
    /// Most negative slack observed (positive = all good, with room).
    pub worst_margin: T,
}

impl<T: Scalar> DescentChainReport<T> {
    pub fn clean(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn descent_chain_check<T: Scalar>(
    trace: &[IterationRecord<T>],
    c_factor: T,
) -> Result<DescentChainReport<T>, DiagnosticsError> {
    let mut checked = 0;
    let mut violations = Vec::new();
    let mut worst = T::infinity();
    for pair in trace.windows(2) {
        let (cur, next) = (&pair[0], &pair[1]);
        let (dc, dn) = match (&cur.diagnostics, &next.diagnostics) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(DiagnosticsError::MissingDiagnostics),
        };
        let g_sq = cur.grad_norm_sampled * cur.grad_norm_sampled;
        let bound = dc.f_full - c_factor * g_sq + cur.zeta + dc.nu + dc.nu;
        let margin = bound - dn.f_full;
        if margin < worst {
            worst = margin;
        }
        if margin < T::zero() {
            violations.push((cur.k, margin));
        }
        checked += 1;
    }
    Ok(DescentChainReport {
        checked,
        violations,
        worst_margin: worst,
    })
}
