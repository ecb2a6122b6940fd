//! Small dense linear-algebra and summation helpers.
//!
//! Everything here is deliberately minimal: the largest systems solved are
//! the per-step Newton corrections of the implicit scheme (state dimension at
//! most a few hundred), and the power iterations only feed validation checks
//! with generous tolerances.

use crate::scalar::{real, Scalar};

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Euclidean norm.
pub(crate) fn norm<T: Scalar>(v: &[T]) -> T {
    dot(v, v).sqrt()
}

/// Euclidean distance between two states.
pub(crate) fn distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc.sqrt()
}

/// Neumaier-compensated accumulator.
///
/// Used wherever a reduction over paths must not depend on how the work was
/// chunked: callers feed values in a fixed (ascending path index) order and
/// the compensation keeps the result stable against cancellation. Inputs must
/// be finite; callers short-circuit infinite contributions beforehand.
#[derive(Clone)]
pub(crate) struct CompensatedSum<T> {
    sum: T,
    compensation: T,
}

impl<T: Scalar> CompensatedSum<T> {
    pub(crate) fn new() -> Self {
        Self {
            sum: T::zero(),
            compensation: T::zero(),
        }
    }

    pub(crate) fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> T {
        self.sum + self.compensation
    }
}

/// Solves the dense system `a x = b` in place by LU with partial pivoting.
///
/// `a` is row-major `n x n` with `n = b.len()`; on success `b` holds the
/// solution. Returns `None` when a pivot vanishes or turns non-finite.
pub(crate) fn lu_solve<T: Scalar>(a: &mut [T], b: &mut [T]) -> Option<()> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_mag = a[col * n + col].abs();
        for row in col + 1..n {
            let mag = a[row * n + col].abs();
            if mag > pivot_mag {
                pivot_row = row;
                pivot_mag = mag;
            }
        }
        if !(pivot_mag > T::zero()) || !pivot_mag.is_finite() {
            return None;
        }
        if pivot_row != col {
            for k in col..n {
                a.swap(col * n + k, pivot_row * n + k);
            }
            b.swap(col, pivot_row);
        }
        let pivot = a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] / pivot;
            if factor == T::zero() {
                continue;
            }
            a[row * n + col] = T::zero();
            for k in col + 1..n {
                let upd = a[col * n + k] * factor;
                a[row * n + k] -= upd;
            }
            b[row] -= factor * b[col];
        }
    }
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row * n + k] * b[k];
        }
        b[row] = acc / a[row * n + row];
    }
    Some(())
}

/// Spectral (operator) norm of a row-major `rows x cols` matrix.
///
/// Power iteration on `A^T A` from a deterministic, slightly asymmetric start
/// vector; converges to well beyond the validation tolerances used by the
/// callers. The zero matrix yields zero.
pub(crate) fn operator_norm<T: Scalar>(a: &[T], rows: usize, cols: usize) -> T {
    debug_assert_eq!(a.len(), rows * cols);
    if rows == 0 || cols == 0 {
        return T::zero();
    }
    let mut v: Vec<T> = (0..cols)
        .map(|j| T::one() + real::<T>(j as f64) * real::<T>(1e-3))
        .collect();
    let vnorm = norm(&v);
    for x in &mut v {
        *x = *x / vnorm;
    }
    let mut av = vec![T::zero(); rows];
    let mut w = vec![T::zero(); cols];
    let mut previous = T::zero();
    for iteration in 0..200 {
        for (r, slot) in av.iter_mut().enumerate() {
            *slot = dot(&a[r * cols..(r + 1) * cols], &v);
        }
        // ||v|| = 1, so ||A v|| estimates the top singular value.
        let sigma = norm(&av);
        if iteration > 2 && (sigma - previous).abs() <= real::<T>(1e-14) * sigma.max(T::one()) {
            return sigma;
        }
        previous = sigma;
        for (c, slot) in w.iter_mut().enumerate() {
            let mut acc = T::zero();
            for r in 0..rows {
                acc += a[r * cols + c] * av[r];
            }
            *slot = acc;
        }
        let wnorm = norm(&w);
        if wnorm == T::zero() {
            return sigma;
        }
        for (slot, &x) in v.iter_mut().zip(&w) {
            *slot = x / wnorm;
        }
    }
    previous
}
