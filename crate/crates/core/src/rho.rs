//! Smooth periodic reference density given by a truncated Fourier series.
//!
//! `ρ(x) = 1 + Σ_k a_k cos(2πkx) + b_k sin(2πkx)`; the constant term is
//! pinned to one so that `∫ρ = 1` holds exactly.

use crate::error::{Result, VfdError};
use crate::scalar::Real;

/// Default number of audit points used to certify positivity and `λ`.
pub const DEFAULT_AUDIT_POINTS: usize = 16 * 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct RhoSpec<T> {
    cos: Vec<T>,
    sin: Vec<T>,
    min: T,
    max: T,
    lambda: T,
    eta1: T,
    eta2: T,
}

impl<T: Real> RhoSpec<T> {
    /// `ρ ≡ 1`.
    pub fn uniform() -> Self {
        Self::new(Vec::new(), Vec::new()).expect("uniform density is valid")
    }

    /// Builds `ρ` from cosine and sine coefficients of modes `1, 2, …`.
    pub fn new(cos: Vec<T>, sin: Vec<T>) -> Result<Self> {
        Self::with_audit(cos, sin, DEFAULT_AUDIT_POINTS)
    }

    pub fn with_audit(mut cos: Vec<T>, mut sin: Vec<T>, audit_points: usize) -> Result<Self> {
        if cos.iter().chain(&sin).any(|c| !c.is_finite()) {
            return Err(VfdError::InvalidParams("rho coefficients must be finite".into()));
        }
        let modes = cos.len().max(sin.len());
        cos.resize(modes, T::zero());
        sin.resize(modes, T::zero());

        let two_pi = T::two_pi();
        let (mut eta1, mut eta2) = (T::zero(), T::zero());
        for k in 0..modes {
            let amp = cos[k].hypot(sin[k]);
            let w = two_pi * T::from_usize_lossy(k + 1);
            eta1 = eta1 + amp * w;
            eta2 = eta2 + amp * w * w;
        }

        let mut spec = Self {
            cos,
            sin,
            min: T::one(),
            max: T::one(),
            lambda: T::one(),
            eta1,
            eta2,
        };
        if modes > 0 {
            let (min, max) = spec.audit_extremes(audit_points.max(16 * (modes + 1)));
            if !(min > T::zero()) {
                return Err(VfdError::RhoNotPositive {
                    min: min.to_f64_lossy(),
                });
            }
            spec.min = min;
            spec.max = max;
            spec.lambda = min.min(max.recip()).min(T::one());
        }
        Ok(spec)
    }

    pub fn is_uniform(&self) -> bool {
        self.cos.iter().chain(&self.sin).all(|c| c.is_zero())
    }

    pub fn cos_coefficients(&self) -> &[T] {
        &self.cos
    }

    pub fn sin_coefficients(&self) -> &[T] {
        &self.sin
    }

    /// `λ = min(min ρ, 1/max ρ)`, so that `λ ≤ ρ ≤ 1/λ`.
    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn min(&self) -> T {
        self.min
    }

    pub fn max(&self) -> T {
        self.max
    }

    /// Upper bound on `sup|ρ′|`: `Σ_k 2πk·|c_k|`.
    pub fn eta1(&self) -> T {
        self.eta1
    }

    /// Upper bound on `sup|ρ″|`: `Σ_k (2πk)²·|c_k|`.
    pub fn eta2(&self) -> T {
        self.eta2
    }

    /// Evaluates `ρ`, `ρ′` or `ρ″` (for `order` 0, 1, 2) by term-wise
    /// differentiation of the Fourier sum.
    pub fn eval(&self, order: u8, x: T) -> T {
        let two_pi = T::two_pi();
        let mut acc = if order == 0 { T::one() } else { T::zero() };
        for (k, (&a, &b)) in self.cos.iter().zip(&self.sin).enumerate() {
            if a.is_zero() && b.is_zero() {
                continue;
            }
            let w = two_pi * T::from_usize_lossy(k + 1);
            let (s, c) = (w * x).sin_cos();
            acc = acc
                + match order {
                    0 => a * c + b * s,
                    1 => w * (b * c - a * s),
                    2 => -w * w * (a * c + b * s),
                    _ => panic!("derivative order {order} not supported"),
                };
        }
        acc
    }

    #[inline]
    pub fn value(&self, x: T) -> T {
        self.eval(0, x)
    }

    #[inline]
    pub fn d1(&self, x: T) -> T {
        self.eval(1, x)
    }

    #[inline]
    pub fn d2(&self, x: T) -> T {
        self.eval(2, x)
    }

    /// Antiderivative `P(x) = ∫₀ˣ ρ`, valid for every real `x`
    /// (`P(x + 1) = P(x) + 1`).
    pub fn cumulative(&self, x: T) -> T {
        let two_pi = T::two_pi();
        let mut acc = x;
        for (k, (&a, &b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let w = two_pi * T::from_usize_lossy(k + 1);
            let (s, c) = (w * x).sin_cos();
            acc = acc + (a * s + b * (T::one() - c)) / w;
        }
        acc
    }

    /// Samples `order`-th derivative at the given positions.
    pub fn sample(&self, order: u8, xs: &[T]) -> Vec<T> {
        xs.iter().map(|&x| self.eval(order, x)).collect()
    }

    fn audit_extremes(&self, points: usize) -> (T, T) {
        let step = T::one() / T::from_usize_lossy(points);
        let vals: Vec<T> = (0..points).map(|i| self.value(T::from_usize_lossy(i) * step)).collect();
        let (mut lo, mut hi) = (T::infinity(), T::neg_infinity());
        for i in 0..points {
            let prev = vals[(i + points - 1) % points];
            let next = vals[(i + 1) % points];
            let x = T::from_usize_lossy(i) * step;
            if vals[i] <= prev && vals[i] <= next {
                lo = lo.min(vals[i]).min(self.value(self.polish_extremum(x, step)));
            }
            if vals[i] >= prev && vals[i] >= next {
                hi = hi.max(vals[i]).max(self.value(self.polish_extremum(x, step)));
            }
        }
        (lo, hi)
    }

    /// Newton iterations on `ρ′ = 0`, confined to `[x - step, x + step]`.
    fn polish_extremum(&self, x0: T, step: T) -> T {
        let mut x = x0;
        for _ in 0..8 {
            let d2 = self.d2(x);
            if d2.is_zero() {
                break;
            }
            let next = x - self.d1(x) / d2;
            if (next - x0).abs() > step {
                return x0;
            }
            x = next;
        }
        x
    }
}
