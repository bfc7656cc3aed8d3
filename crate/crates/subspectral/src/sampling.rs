//! Sample-size schedule and the nested / non-nested subsample generators.
//!
//! The default schedule is geometric with a cap: `N_k = min(⌈τᵏ N₀⌉, N)`.
//! The framework itself only requires non-decreasing sizes, so the schedule
//! is a trait and callers may plug their own rule.

use rand::Rng;
use thiserror::Error;

use crate::dataset::{draw_without_replacement, partial_shuffle};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SamplingError {
    #[error("requested sample size {requested} exceeds the full size {full}")]
    TooLarge { requested: usize, full: usize },
    #[error("requested sample size {requested} below current size {current}")]
    Shrinking { requested: usize, current: usize },
    #[error("previous sample is empty")]
    EmptyPrevious,
}

/// Non-decreasing sample-size rule, capped at the full size.
pub trait SampleSchedule {
    /// `N_k` for iteration `k`.
    fn size_at(&self, k: usize) -> usize;

    /// Full training-set size `N`.
    fn full_size(&self) -> usize;
}

/// `N_k = min(⌈τᵏ N₀⌉, N)` with growth factor `τ > 1`.
#[derive(Debug, Clone, Copy)]
pub struct GeometricSchedule {
    initial: usize,
    tau: f64,
    full: usize,
}

impl GeometricSchedule {
    pub fn new(initial: usize, tau: f64, full: usize) -> Self {
        assert!(initial >= 1, "initial sample size must be at least 1");
        assert!(tau > 1.0, "growth factor must exceed 1");
        assert!(initial <= full, "initial size cannot exceed the full size");
        GeometricSchedule { initial, tau, full }
    }

    /// Degenerate schedule that always returns the full set.
    pub fn full_only(full: usize) -> Self {
        GeometricSchedule {
            initial: full,
            tau: 2.0,
            full,
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn initial(&self) -> usize {
        self.initial
    }
}

impl SampleSchedule for GeometricSchedule {
    fn size_at(&self, k: usize) -> usize {
        let grown = self.tau.powi(k as i32) * self.initial as f64;
        if !grown.is_finite() || grown >= self.full as f64 {
            self.full
        } else {
            (grown.ceil() as usize).min(self.full)
        }
    }

    fn full_size(&self) -> usize {
        self.full
    }
}

/// An index subset of the training set, stored ascending, with the iteration
/// it was generated for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSet {
    indices: Vec<usize>,
    k: usize,
}

impl SampleSet {
    /// Uniform draw of `size` indices from `0..full` without replacement.
    pub fn draw<R: Rng>(size: usize, full: usize, k: usize, rng: &mut R) -> SampleSet {
        assert!(size >= 1 && size <= full);
        SampleSet {
            indices: draw_without_replacement(full, size, rng),
            k,
        }
    }

    /// The whole training set `0..full`.
    pub fn full(full: usize, k: usize) -> SampleSet {
        SampleSet {
            indices: (0..full).collect(),
            k,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iteration(&self) -> usize {
        self.k
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.binary_search(&j).is_ok()
    }
}

/// Grows `prev` into a superset of size `size`: the new indices are drawn
/// uniformly without replacement from the complement of `prev`.
pub fn next_nested<R: Rng>(
    prev: &SampleSet,
    size: usize,
    full: usize,
    k: usize,
    rng: &mut R,
) -> Result<SampleSet, SamplingError> {
    if size > full {
        return Err(SamplingError::TooLarge {
            requested: size,
            full,
        });
    }
    if size < prev.len() {
        return Err(SamplingError::Shrinking {
            requested: size,
            current: prev.len(),
        });
    }
    if size == prev.len() {
        return Ok(SampleSet {
            indices: prev.indices.clone(),
            k,
        });
    }
    let mut complement: Vec<usize> = Vec::with_capacity(full - prev.len());
    let mut it = prev.indices.iter().peekable();
    for j in 0..full {
        match it.peek() {
            Some(&&p) if p == j => {
                it.next();
            }
            _ => complement.push(j),
        }
    }
    let extra = size - prev.len();
    partial_shuffle(&mut complement, extra, rng);
    let mut indices = prev.indices.clone();
    indices.extend_from_slice(&complement[..extra]);
    indices.sort_unstable();
    Ok(SampleSet { indices, k })
}

/// Fresh draw of `size` indices that keeps one uniformly chosen index `j₁`
/// from `prev`, guaranteeing a non-empty intersection with it; the remaining
/// `size − 1` indices are drawn uniformly from the rest of the training set.
pub fn next_non_nested<R: Rng>(
    prev: &SampleSet,
    size: usize,
    full: usize,
    k: usize,
    rng: &mut R,
) -> Result<SampleSet, SamplingError> {
    if size > full {
        return Err(SamplingError::TooLarge {
            requested: size,
            full,
        });
    }
    if prev.is_empty() {
        return Err(SamplingError::EmptyPrevious);
    }
    assert!(size >= 1, "sample size must be at least 1");
    let j1 = prev.indices[rng.gen_range(0..prev.len())];
    let mut others: Vec<usize> = (0..full).filter(|&j| j != j1).collect();
    partial_shuffle(&mut others, size - 1, rng);
    let mut indices = Vec::with_capacity(size);
    indices.push(j1);
    indices.extend_from_slice(&others[..size - 1]);
    indices.sort_unstable();
    Ok(SampleSet { indices, k })
}

/// Ordered intersection of two sample sets.
pub fn intersection(a: &SampleSet, b: &SampleSet) -> Vec<usize> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.indices.len() && j < b.indices.len() {
        match a.indices[i].cmp(&b.indices[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a.indices[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn geometric_schedule_examples() {
        let s = GeometricSchedule::new(3, 1.1, 100);
        assert_eq!(s.size_at(0), 3);
        assert_eq!(s.size_at(1), 4); // ceil(3.3)
        // 3 · 1.1⁴⁰ = 135.78 → 136 > 100 → capped
        assert_eq!(s.size_at(40), 100);
        // Far past any representable growth: still the cap, no overflow.
        assert_eq!(s.size_at(100_000), 100);
    }

    #[test]
    fn schedule_is_monotone_and_sticks_at_full() {
        let s = GeometricSchedule::new(3, 1.3, 500);
        let mut reached_full = false;
        for k in 0..200 {
            assert!(s.size_at(k + 1) >= s.size_at(k));
            if s.size_at(k) == 500 {
                reached_full = true;
            }
            if reached_full {
                assert_eq!(s.size_at(k), 500);
            }
        }
        assert!(reached_full);
    }

    #[test]
    fn nested_no_growth_returns_prev_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let prev = SampleSet::draw(5, 20, 0, &mut rng);
        let next = next_nested(&prev, 5, 20, 1, &mut rng).unwrap();
        assert_eq!(prev.indices(), next.indices());
    }

    #[test]
    fn nested_reaching_full_returns_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let prev = SampleSet::draw(5, 20, 0, &mut rng);
        let next = next_nested(&prev, 20, 20, 1, &mut rng).unwrap();
        assert_eq!(next.indices(), (0..20).collect::<Vec<_>>());
        assert!(matches!(
            next_nested(&prev, 21, 20, 1, &mut rng),
            Err(SamplingError::TooLarge { .. })
        ));
    }

    #[test]
    fn non_nested_full_request_gives_full_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let prev = SampleSet::draw(4, 15, 0, &mut rng);
        let next = next_non_nested(&prev, 15, 15, 1, &mut rng).unwrap();
        assert_eq!(next.indices(), (0..15).collect::<Vec<_>>());
        assert_eq!(intersection(&prev, &next), prev.indices().to_vec());
    }

    #[test]
    fn intersection_examples() {
        let a = SampleSet {
            indices: vec![1, 2, 3],
            k: 0,
        };
        let b = SampleSet {
            indices: vec![2, 3, 4],
            k: 1,
        };
        assert_eq!(intersection(&a, &b), vec![2, 3]);
        let disjoint = SampleSet {
            indices: vec![7, 9],
            k: 1,
        };
        assert_eq!(intersection(&a, &disjoint), Vec::<usize>::new());
        // Nested case: intersection is the previous set.
        let sup = SampleSet {
            indices: vec![1, 2, 3, 5, 8],
            k: 1,
        };
        assert_eq!(intersection(&a, &sup), a.indices().to_vec());
    }

    #[test]
    fn non_nested_intersection_statistics_match_hypergeometric() {
        // N = 10, |prev| = 5, N_k = 5: j₁ is kept, the other 4 slots hit the
        // remaining 4 prev indices with hypergeometric counts drawn from a
        // 9-element pool. P(|I| > 1) = 1 − C(5,4)/C(9,4) = 121/126 ≈ 0.9603,
        // E|I| = 1 + 4·4/9 ≈ 2.778.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let prev = SampleSet::draw(5, 10, 0, &mut rng);
        let trials = 1000;
        let mut exceeds_one = 0usize;
        let mut total = 0usize;
        for _ in 0..trials {
            let next = next_non_nested(&prev, 5, 10, 1, &mut rng).unwrap();
            let isec = intersection(&prev, &next).len();
            assert!(isec >= 1);
            if isec > 1 {
                exceeds_one += 1;
            }
            total += isec;
        }
        let freq = exceeds_one as f64 / trials as f64;
        assert!((0.90..=0.995).contains(&freq), "P(|I|>1) ≈ {freq}");
        let mean = total as f64 / trials as f64;
        // 5σ of the mean of hypergeometric counts (σ² ≈ 0.617).
        assert!((mean - 2.7778).abs() < 5.0 * (0.617f64 / trials as f64).sqrt() + 0.05,
            "E|I| ≈ {mean}");
    }

    #[test]
    fn per_index_inclusion_is_uniform() {
        // Nested growth from a fixed prev: complement indices should all be
        // picked equally often. 5σ binomial band.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let prev = SampleSet::draw(4, 24, 0, &mut rng);
        let trials = 4000;
        let mut hits = vec![0usize; 24];
        for _ in 0..trials {
            let next = next_nested(&prev, 9, 24, 1, &mut rng).unwrap();
            for &j in next.indices() {
                if !prev.contains(j) {
                    hits[j] += 1;
                }
            }
        }
        let p = 5.0 / 20.0; // 5 new slots over a 20-element complement
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        for j in 0..24 {
            if prev.contains(j) {
                assert_eq!(hits[j], 0);
            } else {
                let f = hits[j] as f64 / trials as f64;
                assert!((f - p).abs() < 5.0 * sigma, "index {j}: freq {f} vs {p}");
            }
        }
    }

    proptest! {
        #[test]
        fn nested_chains_grow_monotonically(seed in 0u64..500, full in 6usize..60) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let schedule = GeometricSchedule::new(2, 1.4, full);
            let mut cur = SampleSet::draw(schedule.size_at(0), full, 0, &mut rng);
            for k in 1..12 {
                let next = next_nested(&cur, schedule.size_at(k).max(cur.len()), full, k, &mut rng).unwrap();
                prop_assert!(cur.indices().iter().all(|&j| next.contains(j)));
                prop_assert!(next.indices().windows(2).all(|w| w[0] < w[1]));
                cur = next;
            }
        }

        #[test]
        fn non_nested_chains_always_intersect(seed in 0u64..500, full in 6usize..60) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let schedule = GeometricSchedule::new(2, 1.4, full);
            let mut cur = SampleSet::draw(schedule.size_at(0), full, 0, &mut rng);
            for k in 1..12 {
                let next = next_non_nested(&cur, schedule.size_at(k), full, k, &mut rng).unwrap();
                prop_assert!(!intersection(&cur, &next).is_empty());
                prop_assert_eq!(next.len(), schedule.size_at(k));
                cur = next;
            }
        }
    }
}
