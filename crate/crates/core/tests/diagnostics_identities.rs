use std::f64::consts::TAU;

use approx::assert_abs_diff_eq;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vfd_core::diagnostics::{first_variation, gamma, weighted_laplacian};
use vfd_core::random::{fourier_field, smooth_density};
use vfd_core::{
    beta_projection, energy, modulated_energy, otto_metric, solve_potential, stationary_density, Dens, Grid, Rho,
};

#[test]
fn modulated_energy_sandwich() {
    let g = Grid::new(256).unwrap();
    let rho = Rho::new(vec![0.2], vec![0.1]).unwrap();
    let finf = stationary_density(&rho, 2.0, g);
    let shift: f64 = g.integrate(&g.sample(|x| rho.value(x).powf(1.0 / 3.0))) / gamma(&rho, 2.0, g).powi(2);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..20 {
        let f = smooth_density(g, &mut rng, 3, 0.4);
        let m = modulated_energy(&f, &rho, 2.0);
        let d2 = f.l2_distance(&finf).unwrap().powi(2);
        assert!(m.lower * d2 <= m.integral * (1.0 + 1e-12));
        assert!(m.integral <= m.upper * d2 * (1.0 + 1e-12));
        assert_abs_diff_eq!(m.integral, energy(&f, &rho, 2.0) - shift, epsilon = 1e-10);
    }
}

#[test]
fn beta_projection_vanishes_at_equilibrium() {
    let g = Grid::new(128).unwrap();
    let rho = Rho::new(vec![0.3], vec![]).unwrap();
    let finf = stationary_density(&rho, 2.0, g);
    let b = beta_projection(&finf, &rho, 2.0);
    assert_abs_diff_eq!(b.beta, gamma(&rho, 2.0, g), epsilon = 1e-12);
    assert!(b.residual < 1e-20);
}

#[test]
fn first_variation_matches_map_perturbation() {
    let g = Grid::new(512).unwrap();
    let rho = Rho::new(vec![0.1], vec![0.2]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..10 {
        let f = smooth_density(g, &mut rng, 3, 0.3);
        let phi: Vec<f64> = fourier_field(g, &mut rng, 3).iter().map(|v| 0.05 * v).collect();
        let e = 1e-5;
        let plus = vfd_core::diagnostics::energy_along_geodesic(&f, &rho, 2.0, &phi, e).unwrap();
        let minus = vfd_core::diagnostics::energy_along_geodesic(&f, &rho, 2.0, &phi, -e).unwrap();
        let fd = (plus - minus) / (2.0 * e);
        let dv = first_variation(&f, &rho, 2.0, &phi).unwrap();
        assert_abs_diff_eq!(fd, dv, epsilon = 1e-6 * dv.abs().max(1.0));
    }
}

#[test]
fn potential_inverts_weighted_laplacian() {
    let g = Grid::new(128).unwrap();
    let f = Dens::from_fn(g, |x| 1.0 + 0.5 * (TAU * x).cos()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let phi = fourier_field(g, &mut rng, 4);
    let lap = weighted_laplacian(&f, &phi);
    assert!(g.integrate(&lap).abs() < 1e-12);
    let back = solve_potential(&f, &lap).unwrap();
    for (a, b) in back.iter().zip(&phi) {
        assert_abs_diff_eq!(*a, *b, epsilon = 1e-9);
    }
}

#[test]
fn potential_rejects_massive_perturbation() {
    let g = Grid::new(32).unwrap();
    let f = Dens::uniform(g);
    assert!(solve_potential(&f, &vec![1.0; 32]).is_err());
}

#[test]
fn otto_metric_is_symmetric_and_positive() {
    let g = Grid::new(128).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    let f = smooth_density(g, &mut rng, 3, 0.5);
    let a = fourier_field(g, &mut rng, 3);
    let b = fourier_field(g, &mut rng, 3);
    let ab = otto_metric(&f, &a, &b).unwrap();
    assert_abs_diff_eq!(ab, otto_metric(&f, &b, &a).unwrap(), epsilon = 1e-12);
    assert!(otto_metric(&f, &a, &a).unwrap() > 0.0);
}
