//! Gradient-displacement variants, the safeguarded Barzilai-Borwein
//! coefficient, and the search direction.
//!
//! With `s = x_k − x_{k−1}` and a displacement `y` of sampled gradients, the
//! spectral coefficient is `σ = sᵀy / sᵀs` clamped to `[σ_m, σ_M]` with
//! fallback 1, and the direction is `d = −σ⁻¹ g`. Three displacements trade
//! accuracy against evaluation cost:
//!
//! * `y⁽¹⁾` re-samples both gradients on the current set — pays fresh
//!   component-gradient evaluations at the previous point;
//! * `y⁽²⁾` differences the stored aggregate gradients — free;
//! * `y⁽³⁾` restricts both gradients to the overlap of consecutive samples —
//!   free scalar products (cache hits at the current point, storage at the
//!   previous one).

use crate::linalg;
use crate::objective::{CostCounters, ExpCache, FiniteSumObjective};
use crate::sampling::SampleSet;
use crate::Scalar;

/// Per-component gradients retained from the previous iteration, aligned with
/// the ascending index order of the sample they were computed on.
#[derive(Debug, Clone)]
pub struct ComponentGradients<T> {
    indices: Vec<usize>,
    data: Vec<T>,
    dim: usize,
}

impl<T: Scalar> ComponentGradients<T> {
    pub fn new(indices: Vec<usize>, data: Vec<T>, dim: usize) -> Self {
        assert_eq!(indices.len() * dim, data.len());
        ComponentGradients { indices, data, dim }
    }

    /// Stored gradient of component `j`, if `j` was in the sample.
    pub fn get(&self, j: usize) -> Option<&[T]> {
        self.indices
            .binary_search(&j)
            .ok()
            .map(|pos| &self.data[pos * self.dim..(pos + 1) * self.dim])
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Everything the spectral step remembers about the previous iteration.
///
/// Nested methods keep only the previous point, aggregate gradient and sample
/// size; non-nested methods additionally keep the per-component gradients of
/// the previous sample, which `y⁽¹⁾` and `y⁽³⁾` read back at zero cost.
#[derive(Debug, Clone)]
pub struct SpectralState<T> {
    pub prev_point: Vec<T>,
    pub prev_gradient: Vec<T>,
    pub prev_sample: SampleSet,
    pub component_gradients: Option<ComponentGradients<T>>,
}

/// Safeguarded Barzilai-Borwein coefficient: `sᵀy/sᵀs` when that ratio lies
/// in `[σ_m, σ_M]`, otherwise 1. A zero step (`s = 0`, possible after a
/// failed line search) also yields 1.
pub fn bb_coefficient<T: Scalar>(s: &[T], y: &[T], sigma_min: T, sigma_max: T) -> T {
    debug_assert!(sigma_min > T::zero() && sigma_min < T::one() && sigma_max > T::one());
    let ss = linalg::norm_sq(s);
    if ss == T::zero() {
        return T::one();
    }
    let ratio = linalg::dot(s, y) / ss;
    if ratio >= sigma_min && ratio <= sigma_max {
        ratio
    } else {
        T::one()
    }
}

/// Search direction `d = −σ⁻¹ g`; always a descent direction for `g ≠ 0`
/// since `gᵀd = −σ⁻¹‖g‖² < 0`.
pub fn direction<T: Scalar>(sigma: T, g: &[T]) -> Vec<T> {
    assert!(sigma > T::zero(), "spectral coefficient must be positive");
    g.iter().map(|&gi| -(gi / sigma)).collect()
}

/// `y⁽¹⁾` for nested samples: `∇f_{𝒩_k}(x_k) − ∇f_{𝒩_k}(x_{k−1})`.
///
/// The current-point side is the already computed `g_k`. The previous-point
/// side reuses the stored aggregate over the old sample and freshly evaluates
/// only the components in `cur \ prev`, each paying `SP`, `GE_1`, `GE_2`.
pub fn displacement_y1_nested<T, O>(
    objective: &O,
    cur: &SampleSet,
    g_k: &[T],
    state: &SpectralState<T>,
    old_point_cache: &mut ExpCache<T>,
    counters: &mut CostCounters,
) -> Vec<T>
where
    T: Scalar,
    O: FiniteSumObjective<T>,
{
    let n = objective.dimension();
    let n_cur = T::from_count(cur.len());
    let scale = T::from_count(state.prev_sample.len()) / n_cur;

    let mut acc = vec![T::zero(); n];
    let mut comp = vec![T::zero(); n];
    for &j in cur.indices() {
        if !state.prev_sample.contains(j) {
            objective.component_gradient_into(j, &state.prev_point, old_point_cache, counters, &mut comp);
            for (a, c) in acc.iter_mut().zip(comp.iter()) {
                *a = *a + *c;
            }
        }
    }
    (0..n)
        .map(|i| g_k[i] - (state.prev_gradient[i] * scale + acc[i] / n_cur))
        .collect()
}

/// `y⁽¹⁾` for non-nested samples. Components in the overlap come from the
/// stored per-component gradients at zero cost; the rest are evaluated fresh
/// at the previous point.
pub fn displacement_y1_non_nested<T, O>(
    objective: &O,
    cur: &SampleSet,
    g_k: &[T],
    state: &SpectralState<T>,
    old_point_cache: &mut ExpCache<T>,
    counters: &mut CostCounters,
) -> Vec<T>
where
    T: Scalar,
    O: FiniteSumObjective<T>,
{
    let stored = state
        .component_gradients
        .as_ref()
        .expect("non-nested methods retain per-component gradients");
    let n = objective.dimension();
    let mut acc = vec![T::zero(); n];
    let mut comp = vec![T::zero(); n];
    for &j in cur.indices() {
        match stored.get(j) {
            Some(row) => {
                for (a, c) in acc.iter_mut().zip(row.iter()) {
                    *a = *a + *c;
                }
            }
            None => {
                objective.component_gradient_into(j, &state.prev_point, old_point_cache, counters, &mut comp);
                for (a, c) in acc.iter_mut().zip(comp.iter()) {
                    *a = *a + *c;
                }
            }
        }
    }
    let n_cur = T::from_count(cur.len());
    (0..n).map(|i| g_k[i] - acc[i] / n_cur).collect()
}

/// `y⁽²⁾ = ∇f_{𝒩_k}(x_k) − ∇f_{𝒩_{k−1}}(x_{k−1})`: a plain difference of
/// the stored aggregates, no extra computation, no counter change.
pub fn displacement_y2<T: Scalar>(g_k: &[T], g_prev: &[T]) -> Vec<T> {
    linalg::sub(g_k, g_prev)
}

/// `y⁽³⁾ = ∇f_{I_k}(x_k) − ∇f_{I_k}(x_{k−1})` over the overlap `I_k` of
/// consecutive samples. The current-point gradients are cache hits (the
/// functions were evaluated at `x_k` this iteration), so only `GE_2` moves;
/// the previous-point side is read from storage.
pub fn displacement_y3<T, O>(
    objective: &O,
    overlap: &[usize],
    x_k: &[T],
    state: &SpectralState<T>,
    current_cache: &mut ExpCache<T>,
    counters: &mut CostCounters,
) -> Vec<T>
where
    T: Scalar,
    O: FiniteSumObjective<T>,
{
    assert!(!overlap.is_empty(), "overlap of consecutive samples is empty");
    let stored = state
        .component_gradients
        .as_ref()
        .expect("non-nested methods retain per-component gradients");
    let n = objective.dimension();
    let m = T::from_count(overlap.len());

    let mut acc_cur = vec![T::zero(); n];
    let mut comp = vec![T::zero(); n];
    for &j in overlap {
        objective.component_gradient_into(j, x_k, current_cache, counters, &mut comp);
        for (a, c) in acc_cur.iter_mut().zip(comp.iter()) {
            *a = *a + *c;
        }
    }
    let mut acc_prev = vec![T::zero(); n];
    for &j in overlap {
        let row = stored.get(j).expect("overlap lies in the previous sample");
        for (a, c) in acc_prev.iter_mut().zip(row.iter()) {
            *a = *a + *c;
        }
    }
    (0..n).map(|i| acc_cur[i] / m - acc_prev[i] / m).collect()
}
