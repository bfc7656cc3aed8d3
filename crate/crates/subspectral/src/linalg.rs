//! Small dense vector helpers over plain slices.
//!
//! Kept free of clever blocking on purpose: summation order must be fixed and
//! obvious, because run traces are required to replay bitwise.

use crate::Scalar;

/// Inner product, accumulated left to right.
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b.iter()) {
        acc = acc + *x * *y;
    }
    acc
}

/// Squared Euclidean norm.
pub fn norm_sq<T: Scalar>(a: &[T]) -> T {
    dot(a, a)
}

/// Euclidean norm.
pub fn norm<T: Scalar>(a: &[T]) -> T {
    norm_sq(a).sqrt()
}

/// `out[i] += coef * a[i]`.
pub fn axpy<T: Scalar>(coef: T, a: &[T], out: &mut [T]) {
    debug_assert_eq!(a.len(), out.len());
    for (o, x) in out.iter_mut().zip(a.iter()) {
        *o = *o + coef * *x;
    }
}

/// `a - b` as a new vector.
pub fn sub<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b.iter()).map(|(x, y)| *x - *y).collect()
}
