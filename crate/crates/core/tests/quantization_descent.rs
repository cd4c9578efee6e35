use approx::assert_relative_eq;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vfd_core::experiment::quantize;
use vfd_core::quantization::DescentOptions;
use vfd_core::{descend, fnr_energy, fnr_gradient, optimal_weights, Grid, Points, Rho};

#[test]
fn gradient_matches_energy_differences() {
    let rho = Rho::new(vec![0.2], vec![0.3]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..10 {
        let cfg = Points::stratified(6, &mut rng).unwrap();
        let grad = fnr_gradient(&cfg, &rho, 2.0);
        for (i, &gi) in grad.iter().enumerate() {
            let e = 1e-6;
            let mut up = cfg.points().to_vec();
            let mut dn = cfg.points().to_vec();
            up[i] += e;
            dn[i] -= e;
            let fd = (fnr_energy(&Points::new(up).unwrap(), &rho, 2.0)
                - fnr_energy(&Points::new(dn).unwrap(), &rho, 2.0))
                / (2.0 * e);
            assert!((fd - gi).abs() < 1e-7, "{fd} vs {gi}");
        }
    }
}

#[test]
fn weights_sum_to_one() {
    let rho = Rho::new(vec![0.4], vec![]).unwrap();
    let cfg = Points::equally_spaced(7, 0.03).unwrap();
    let w = optimal_weights(&cfg, &rho);
    assert_relative_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
}

#[test]
fn restarts_agree_on_the_minimum() {
    let rho = Rho::new(vec![0.3], vec![0.1]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let opts = DescentOptions::default();
    let energies: Vec<f64> = (0..4)
        .map(|_| {
            let res = descend(&Points::stratified(12, &mut rng).unwrap(), &rho, 2.0, &opts).unwrap();
            assert!(res.converged);
            assert!(res.energies.windows(2).all(|w| w[1] <= w[0] + 1e-15));
            *res.energies.last().unwrap()
        })
        .collect();
    for e in &energies {
        assert_relative_eq!(*e, energies[0], max_relative = 1e-8);
    }
}

#[test]
fn empirical_measure_approaches_equilibrium() {
    let rho = Rho::new(vec![0.3], vec![]).unwrap();
    let g = Grid::new(512).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let opts = DescentOptions::default();
    let coarse = quantize(16, &rho, 2.0, g, &opts, &mut rng).unwrap();
    let fine = quantize(64, &rho, 2.0, g, &opts, &mut rng).unwrap();
    assert!(fine.w2_to_eq < 0.5 * coarse.w2_to_eq);
    assert!(fine.w2_weighted_to_rho < 0.5 * coarse.w2_weighted_to_rho);
}
