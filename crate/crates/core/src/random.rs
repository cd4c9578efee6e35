//! Smooth random fields for property tests and experiment sweeps.

use rand::Rng;

use crate::density::Density;
use crate::grid::{max_abs, PeriodicGrid};
use crate::scalar::Real;

/// Mean-free trigonometric polynomial of degree `modes` with coefficients
/// uniform in `[-1, 1] / k²`.
pub fn fourier_field<T: Real, R: Rng + ?Sized>(grid: PeriodicGrid<T>, rng: &mut R, modes: usize) -> Vec<T> {
    let coeffs: Vec<(T, T)> = (1..=modes)
        .map(|k| {
            let s = T::lit(1.0 / (k * k) as f64);
            (
                T::lit(rng.gen_range(-1.0..1.0)) * s,
                T::lit(rng.gen_range(-1.0..1.0)) * s,
            )
        })
        .collect();
    let two_pi = T::two_pi();
    grid.sample(|x| {
        coeffs.iter().enumerate().fold(T::zero(), |acc, (k, &(a, b))| {
            let w = two_pi * T::from_usize_lossy(k + 1) * x;
            acc + a * w.cos() + b * w.sin()
        })
    })
}

/// Density `1 + amplitude · φ / max|φ|` for a random field `φ`, so its
/// values lie in `[1 − amplitude, 1 + amplitude]`.
pub fn smooth_density<T: Real, R: Rng + ?Sized>(
    grid: PeriodicGrid<T>,
    rng: &mut R,
    modes: usize,
    amplitude: T,
) -> Density<T> {
    let phi = fourier_field(grid, rng, modes);
    let scale = amplitude / max_abs(&phi).max(T::epsilon());
    // the field is mean-free, so the mass is already one up to rounding
    Density::normalized(grid, phi.iter().map(|&p| T::one() + scale * p).collect())
        .expect("amplitude below one keeps the density positive")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn fields_are_mean_free_and_bounded() {
        let g = PeriodicGrid::<f64>::new(64).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let phi = fourier_field(g, &mut rng, 4);
        assert!(g.integrate(&phi).abs() < 1e-15);
        let f = smooth_density(g, &mut rng, 3, 0.2);
        let (lo, hi) = f.min_max();
        assert!(lo >= 0.8 - 1e-12 && hi <= 1.2 + 1e-12);
    }
}
