//! Uniform periodic grid on the circle `[0, 1)` and the grid calculus used
//! by every solver: centered differences, compact second differences and the
//! periodic rectangle rule.

use crate::error::{Result, VfdError};
use crate::scalar::Real;

/// Smallest grid the solvers accept.
pub const MIN_NODES: usize = 8;

/// `n` equispaced nodes `x_i = i h`, `h = 1/n`, with indices taken modulo `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicGrid<T> {
    n: usize,
    h: T,
}

impl<T: Real> PeriodicGrid<T> {
    pub fn new(n: usize) -> Result<Self> {
        if n < MIN_NODES {
            return Err(VfdError::GridTooSmall(n));
        }
        Ok(Self {
            n,
            h: T::one() / T::from_usize_lossy(n),
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn spacing(&self) -> T {
        self.h
    }

    #[inline]
    pub fn node(&self, i: usize) -> T {
        T::from_usize_lossy(i % self.n) * self.h
    }

    pub fn nodes(&self) -> Vec<T> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    #[inline]
    pub fn next(&self, i: usize) -> usize {
        if i + 1 == self.n {
            0
        } else {
            i + 1
        }
    }

    #[inline]
    pub fn prev(&self, i: usize) -> usize {
        if i == 0 {
            self.n - 1
        } else {
            i - 1
        }
    }

    /// Samples `g` at the nodes.
    pub fn sample(&self, g: impl Fn(T) -> T) -> Vec<T> {
        (0..self.n).map(|i| g(self.node(i))).collect()
    }

    pub fn check_len(&self, v: &[T]) -> Result<()> {
        if v.len() != self.n {
            return Err(VfdError::LengthMismatch {
                expected: self.n,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Centered difference `(v_{i+1} - v_{i-1}) / 2h`.
    ///
    /// `v` must be periodic. For a lifted map such as `x ↦ x` pass the
    /// periodic increment instead.
    pub fn d_dx(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.n);
        let scale = T::one() / (self.h + self.h);
        (0..self.n)
            .map(|i| (v[self.next(i)] - v[self.prev(i)]) * scale)
            .collect()
    }

    /// Compact second difference `(v_{i+1} - 2 v_i + v_{i-1}) / h²`.
    pub fn d2_dx2(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.n);
        let scale = T::one() / (self.h * self.h);
        (0..self.n)
            .map(|i| (v[self.next(i)] - v[i] - v[i] + v[self.prev(i)]) * scale)
            .collect()
    }

    /// Forward difference `(v_{i+1} - v_i) / h`, living on the face `i + 1/2`.
    pub fn face_diff(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.n);
        let scale = T::one() / self.h;
        (0..self.n).map(|i| (v[self.next(i)] - v[i]) * scale).collect()
    }

    /// Arithmetic face average `(v_i + v_{i+1}) / 2`.
    pub fn face_mean(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.n);
        let half = T::lit(0.5);
        (0..self.n).map(|i| (v[i] + v[self.next(i)]) * half).collect()
    }

    /// Periodic rectangle rule `h Σ v_i`.
    pub fn integrate(&self, v: &[T]) -> T {
        debug_assert_eq!(v.len(), self.n);
        self.h * v.iter().copied().sum::<T>()
    }

    /// Rectangle rule over values produced on the fly.
    pub fn h_sum(&self, values: impl Iterator<Item = T>) -> T {
        self.h * values.sum::<T>()
    }

    /// `sqrt(h Σ v_i²)`.
    pub fn l2_norm(&self, v: &[T]) -> T {
        (self.h * v.iter().map(|&x| x * x).sum::<T>()).sqrt()
    }
}

pub fn max_abs<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

pub fn min_max<T: Real>(v: &[T]) -> (T, T) {
    v.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    })
}
