use crate::error::{Result, VfdError};
use crate::grid::{min_max, PeriodicGrid};
use crate::scalar::{mass_tolerance, Real};

/// Strictly positive grid function with unit mass `h Σ f_i = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Density<T> {
    grid: PeriodicGrid<T>,
    values: Vec<T>,
}

fn check_positive<T: Real>(values: &[T]) -> Result<()> {
    match values.iter().position(|&v| !(v > T::zero() && v.is_finite())) {
        Some(index) => Err(VfdError::NonPositive {
            index,
            value: values[index].to_f64_lossy(),
        }),
        None => Ok(()),
    }
}

impl<T: Real> Density<T> {
    /// Wraps values that already carry unit mass.
    pub fn new(grid: PeriodicGrid<T>, values: Vec<T>) -> Result<Self> {
        grid.check_len(&values)?;
        check_positive(&values)?;
        let mass = grid.integrate(&values);
        if (mass - T::one()).abs() > mass_tolerance::<T>() {
            return Err(VfdError::MassMismatch {
                mass: mass.to_f64_lossy(),
            });
        }
        Ok(Self { grid, values })
    }

    /// Divides positive values by their quadrature mass.
    pub fn normalized(grid: PeriodicGrid<T>, mut values: Vec<T>) -> Result<Self> {
        grid.check_len(&values)?;
        check_positive(&values)?;
        let mass = grid.integrate(&values);
        for v in &mut values {
            *v = *v / mass;
        }
        Ok(Self { grid, values })
    }

    /// Samples `g` at the nodes and normalizes.
    pub fn from_fn(grid: PeriodicGrid<T>, g: impl Fn(T) -> T) -> Result<Self> {
        Self::normalized(grid, grid.sample(g))
    }

    pub fn uniform(grid: PeriodicGrid<T>) -> Self {
        Self {
            values: vec![T::one(); grid.len()],
            grid,
        }
    }

    /// `1 + Σ_k a_k cos(2πkx) + b_k sin(2πkx)`, normalized.
    pub fn fourier(grid: PeriodicGrid<T>, cos: &[T], sin: &[T]) -> Result<Self> {
        let two_pi = T::two_pi();
        Self::from_fn(grid, |x| {
            let mut v = T::one();
            for (k, &a) in cos.iter().enumerate() {
                v = v + a * (two_pi * T::from_usize_lossy(k + 1) * x).cos();
            }
            for (k, &b) in sin.iter().enumerate() {
                v = v + b * (two_pi * T::from_usize_lossy(k + 1) * x).sin();
            }
            v
        })
    }

    #[inline]
    pub fn grid(&self) -> &PeriodicGrid<T> {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn mass(&self) -> T {
        self.grid.integrate(&self.values)
    }

    pub fn min_max(&self) -> (T, T) {
        min_max(&self.values)
    }

    /// Periodic piecewise-linear interpolant of the nodal values.
    pub fn interpolate(&self, x: T) -> T {
        let n = self.grid.len();
        let s = (x - x.floor()) * T::from_usize_lossy(n);
        let i = s.floor();
        let w = s - i;
        let i = i.to_usize().unwrap_or(0) % n;
        let j = self.grid.next(i);
        self.values[i] * (T::one() - w) + self.values[j] * w
    }

    pub fn same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(VfdError::GridMismatch {
                left: self.grid.len(),
                right: other.grid.len(),
            });
        }
        Ok(())
    }

    /// Nodewise maximum distance.
    pub fn linf_distance(&self, other: &Self) -> Result<T> {
        self.same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs())))
    }

    pub fn l2_distance(&self, other: &Self) -> Result<T> {
        self.same_grid(other)?;
        let diff: Vec<T> = self.values.iter().zip(&other.values).map(|(&a, &b)| a - b).collect();
        Ok(self.grid.l2_norm(&diff))
    }
}
