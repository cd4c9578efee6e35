use crate::error::{Result, VfdError};
use crate::grid::PeriodicGrid;
use crate::scalar::Real;

/// Strictly increasing lift `X: ℝ → ℝ` of a circle map, stored at the nodes
/// `θ_i = i h` of a periodic grid; `X_{i+n} = X_i + 1` is implied.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportMap<T> {
    grid: PeriodicGrid<T>,
    values: Vec<T>,
}

impl<T: Real> TransportMap<T> {
    pub fn new(grid: PeriodicGrid<T>, values: Vec<T>) -> Result<Self> {
        grid.check_len(&values)?;
        let map = Self { grid, values };
        map.check_monotone()?;
        Ok(map)
    }

    pub fn identity(grid: PeriodicGrid<T>) -> Self {
        Self {
            values: grid.nodes(),
            grid,
        }
    }

    /// `X(θ) = θ + p(θ)` for a periodic perturbation `p`.
    pub fn from_fn(grid: PeriodicGrid<T>, p: impl Fn(T) -> T) -> Result<Self> {
        let values = grid.nodes().into_iter().map(|t| t + p(t)).collect();
        Self::new(grid, values)
    }

    #[inline]
    pub fn grid(&self) -> &PeriodicGrid<T> {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// `X_i` for any integer index, applying the lift.
    pub fn lifted(&self, i: isize) -> T {
        let n = self.grid.len() as isize;
        let wraps = i.div_euclid(n);
        let j = i.rem_euclid(n) as usize;
        self.values[j] + T::from_isize(wraps).expect("wrap count fits")
    }

    /// `X_{i+1} - X_i` for `i = 0..n`, the last one taken across the lift.
    pub fn increments(&self) -> Vec<T> {
        let n = self.grid.len();
        (0..n).map(|i| self.lifted(i as isize + 1) - self.values[i]).collect()
    }

    /// Value one period after the first node minus the first node; always
    /// one by construction of the lift.
    pub fn winding(&self) -> T {
        self.lifted(self.grid.len() as isize) - self.values[0]
    }

    /// Periodic part `X_i − θ_i`.
    pub fn displacement(&self) -> Vec<T> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &x)| x - self.grid.node(i))
            .collect()
    }

    pub fn check_monotone(&self) -> Result<()> {
        for (index, d) in self.increments().into_iter().enumerate() {
            if !(d > T::zero()) {
                return Err(VfdError::MonotonicityLoss {
                    index,
                    increment: d.to_f64_lossy(),
                });
            }
        }
        Ok(())
    }

    /// Piecewise-linear evaluation of the lift at any real `θ`.
    pub fn eval(&self, theta: T) -> T {
        let n = self.grid.len();
        let s = theta * T::from_usize_lossy(n);
        let k = s.floor();
        let w = s - k;
        let i = k.to_isize().expect("index fits");
        let a = self.lifted(i);
        let b = self.lifted(i + 1);
        a + (b - a) * w
    }

    /// Inverse of the piecewise-linear lift at any real `x`.
    pub fn inverse(&self, x: T) -> T {
        let n = self.grid.len();
        let x0 = self.values[0];
        let wraps = (x - x0).floor();
        let y = x - wraps;
        // y in [X_0, X_0 + 1): locate the cell by bisection
        let (mut lo, mut hi) = (0usize, n);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.values[mid] <= y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let a = self.values[lo];
        let b = self.lifted(lo as isize + 1);
        let w = (y - a) / (b - a);
        (T::from_usize_lossy(lo) + w) * self.grid.spacing() + wraps
    }

    /// Largest nodal distance between two maps on the same grid.
    pub fn max_distance(&self, other: &Self) -> Result<T> {
        if self.grid != other.grid {
            return Err(VfdError::GridMismatch {
                left: self.grid.len(),
                right: other.grid.len(),
            });
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs())))
    }
}
