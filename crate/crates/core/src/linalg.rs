//! Banded solvers for the tridiagonal systems produced by the implicit
//! schemes. Row `i` reads `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.

use crate::error::{Result, VfdError};
use crate::scalar::Real;

/// Thomas algorithm; `lower[0]` and `upper[n-1]` are ignored.
pub fn solve_tridiagonal<T: Real>(lower: &[T], diag: &[T], upper: &[T], rhs: &[T]) -> Result<Vec<T>> {
    let n = diag.len();
    debug_assert!(lower.len() == n && upper.len() == n && rhs.len() == n);
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut c = vec![T::zero(); n];
    let mut d = vec![T::zero(); n];
    let mut pivot = diag[0];
    if pivot.is_zero() || !pivot.is_finite() {
        return Err(VfdError::SingularSystem);
    }
    c[0] = upper[0] / pivot;
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i] * c[i - 1];
        if pivot.is_zero() || !pivot.is_finite() {
            return Err(VfdError::SingularSystem);
        }
        c[i] = if i + 1 < n { upper[i] / pivot } else { T::zero() };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        d[i] = d[i] - c[i] * d[i + 1];
    }
    Ok(d)
}

/// Periodic tridiagonal solve: `lower[0]` couples to `x[n-1]` and
/// `upper[n-1]` couples to `x[0]`. Sherman–Morrison on top of Thomas.
pub fn solve_cyclic_tridiagonal<T: Real>(lower: &[T], diag: &[T], upper: &[T], rhs: &[T]) -> Result<Vec<T>> {
    let n = diag.len();
    if n < 3 {
        return Err(VfdError::InvalidParams(
            "cyclic system needs at least 3 unknowns".into(),
        ));
    }
    let beta = lower[0];
    let alpha = upper[n - 1];
    let gamma = -diag[0];
    let mut bb = diag.to_vec();
    bb[0] = diag[0] - gamma;
    bb[n - 1] = diag[n - 1] - alpha * beta / gamma;
    let x = solve_tridiagonal(lower, &bb, upper, rhs)?;
    let mut u = vec![T::zero(); n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = solve_tridiagonal(lower, &bb, upper, &u)?;
    let denom = T::one() + z[0] + beta * z[n - 1] / gamma;
    if denom.is_zero() || !denom.is_finite() {
        return Err(VfdError::SingularSystem);
    }
    let fact = (x[0] + beta * x[n - 1] / gamma) / denom;
    Ok(x.iter().zip(&z).map(|(&xi, &zi)| xi - fact * zi).collect())
}

/// Applies the periodic tridiagonal operator to `x`.
pub fn cyclic_matvec<T: Real>(lower: &[T], diag: &[T], upper: &[T], x: &[T]) -> Vec<T> {
    let n = diag.len();
    (0..n)
        .map(|i| {
            let p = if i == 0 { n - 1 } else { i - 1 };
            let q = if i + 1 == n { 0 } else { i + 1 };
            lower[i] * x[p] + diag[i] * x[i] + upper[i] * x[q]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn cyclic_solve_inverts_matvec(
            seed in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 3..60)
        ) {
            let n = seed.len();
            let lower: Vec<f64> = seed.iter().map(|s| s.0).collect();
            let upper: Vec<f64> = seed.iter().map(|s| s.1).collect();
            // strictly diagonally dominant
            let diag: Vec<f64> = (0..n).map(|i| 2.5 + lower[i].abs() + upper[i].abs()).collect();
            let x: Vec<f64> = seed.iter().map(|s| s.2).collect();
            let b = cyclic_matvec(&lower, &diag, &upper, &x);
            let sol = solve_cyclic_tridiagonal(&lower, &diag, &upper, &b).unwrap();
            for (a, e) in sol.iter().zip(&x) {
                prop_assert!((a - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn plain_tridiagonal() {
        let lower: [f64; 4] = [0.0, -1.0, -1.0, -1.0];
        let diag = [2.0, 2.0, 2.0, 2.0];
        let upper = [-1.0, -1.0, -1.0, 0.0];
        let x = solve_tridiagonal(&lower, &diag, &upper, &[1.0, 0.0, 0.0, 1.0]).unwrap();
        for v in x {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }
}
