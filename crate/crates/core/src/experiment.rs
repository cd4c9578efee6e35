//! Composite runs shared by the command-line tool and the acceptance suite.

use rand::Rng;

use crate::density::Density;
use crate::diagnostics::{
    energy_along_geodesic, hessian_quadratic_form, mu_lower_bound, otto_metric, stationary_density, HessianBoundInputs,
};
use crate::error::Result;
use crate::eulerian::{density_bounds, evolve, NullSink};
use crate::grid::PeriodicGrid;
use crate::lagrangian::{evolve_lagrangian, pushforward_density, quantile_map};
use crate::params::Params;
use crate::quantization::{
    descend, fnr_energy, optimal_weights, w2_uniform_to, w2_weighted_to, DescentOptions, PointConfig,
};
use crate::random::{fourier_field, smooth_density};
use crate::rho::RhoSpec;
use crate::scalar::Real;
use crate::transport::w2_circle;

/// Two solutions evolved side by side and the certified decay of their
/// distance.
#[derive(Debug, Clone)]
pub struct ContractionRun<T> {
    /// `(t, W₂(f₁(t), f₂(t)), e^{−μt} W₂(0))`.
    pub rows: Vec<(T, T, T)>,
    pub mu: T,
    /// Bounds on both solutions used for `μ`.
    pub a: T,
    pub big_a: T,
    /// `None` when `μ ≤ 0`, otherwise whether every row satisfies
    /// `w2 ≤ bound (1 + slack) + floor`.
    pub certified: Option<bool>,
}

pub const CONTRACTION_SLACK: f64 = 1e-3;
/// Distances below this count as zero; identical data never fail.
pub const CONTRACTION_FLOOR: f64 = 1e-9;

pub fn contraction_run<T: Real>(
    f1: &Density<T>,
    f2: &Density<T>,
    rho: &RhoSpec<T>,
    p: &Params<T>,
) -> Result<ContractionRun<T>> {
    f1.same_grid(f2)?;
    let (l1, h1) = f1.min_max();
    let (l2, h2) = f2.min_max();
    let (a, big_a) = density_bounds(rho.lambda(), p.r, l1.min(l2), h1.max(h2));
    let mu = mu_lower_bound(&HessianBoundInputs::for_rho(rho, p.r, a, big_a)?);
    let t1 = evolve(f1, rho, p, &mut NullSink)?;
    let t2 = evolve(f2, rho, p, &mut NullSink)?;
    let w0 = w2_circle(f1, f2)?;
    let mut rows = Vec::with_capacity(t1.snapshots.len());
    for (s1, s2) in t1.snapshots.iter().zip(&t2.snapshots) {
        let w = w2_circle(s1.density(), s2.density())?;
        rows.push((s1.t(), w, (-mu * s1.t()).exp() * w0));
    }
    let slack = T::one() + T::lit(CONTRACTION_SLACK);
    let floor = T::lit(CONTRACTION_FLOOR);
    let certified = (mu > T::zero()).then(|| rows.iter().all(|&(_, w, b)| w <= b * slack + floor));
    Ok(ContractionRun {
        rows,
        mu,
        a,
        big_a,
        certified,
    })
}

/// `max_t ‖f_E(t) − X(t)_# dθ‖∞` for an Eulerian and a Lagrangian run from
/// the same datum.
pub fn cross_validate<T: Real>(f0: &Density<T>, rho: &RhoSpec<T>, p: &Params<T>) -> Result<T> {
    let eul = evolve(f0, rho, p, &mut NullSink)?;
    let lag = evolve_lagrangian(&quantile_map(f0), rho, p)?;
    let mut worst = T::zero();
    for (s, x) in eul.snapshots.iter().zip(&lag.maps) {
        worst = worst.max(s.density().linf_distance(&pushforward_density(x)?)?);
    }
    Ok(worst)
}

/// One sample of the Hessian suite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HessianSample<T> {
    pub quadratic_form: T,
    pub metric: T,
    /// Lower bound `μ` for the bound samples, the second difference of the
    /// energy along the geodesic for the finite-difference samples.
    pub reference: T,
    pub pass: bool,
}

impl<T: Real> HessianSample<T> {
    pub fn ratio(&self) -> T {
        self.quadratic_form / self.metric
    }
}

pub const HESSIAN_BOUND_SLACK: f64 = 1e-8;
pub const HESSIAN_FD_STEP: f64 = 1e-3;
pub const HESSIAN_FD_TOLERANCE: f64 = 1e-3;

fn random_pair<T: Real, R: Rng + ?Sized>(grid: PeriodicGrid<T>, rng: &mut R) -> (Density<T>, Vec<T>) {
    let amplitude = T::lit(rng.gen_range(0.05..0.3));
    let f = smooth_density(grid, rng, 3, amplitude);
    let phi = fourier_field(grid, rng, 3);
    (f, phi)
}

/// `Hess F(φ, φ) ≥ μ g_f(φ, φ)` with `μ` from the actual range of `f`.
pub fn hessian_bound_sample<T: Real, R: Rng + ?Sized>(
    grid: PeriodicGrid<T>,
    rho: &RhoSpec<T>,
    r: T,
    rng: &mut R,
) -> Result<HessianSample<T>> {
    let (f, phi) = random_pair(grid, rng);
    let (a, big_a) = f.min_max();
    let mu = mu_lower_bound(&HessianBoundInputs::for_rho(rho, r, a, big_a)?);
    let q = hessian_quadratic_form(&f, rho, r, &phi)?;
    let g = otto_metric(&f, &phi, &phi)?;
    Ok(HessianSample {
        quadratic_form: q,
        metric: g,
        reference: mu,
        pass: q >= mu * g - T::lit(HESSIAN_BOUND_SLACK),
    })
}

/// Second difference of the energy along `s ↦ (id − s∂xφ)_# f` against the
/// quadratic form.
pub fn hessian_fd_sample<T: Real, R: Rng + ?Sized>(
    grid: PeriodicGrid<T>,
    rho: &RhoSpec<T>,
    r: T,
    rng: &mut R,
) -> Result<HessianSample<T>> {
    let (f, phi) = random_pair(grid, rng);
    // keep the geodesic well inside the monotone range
    let scale = T::lit(0.01);
    let phi: Vec<T> = phi.iter().map(|&p| p * scale).collect();
    let e = T::lit(HESSIAN_FD_STEP);
    let plus = energy_along_geodesic(&f, rho, r, &phi, e)?;
    let zero = energy_along_geodesic(&f, rho, r, &phi, T::zero())?;
    let minus = energy_along_geodesic(&f, rho, r, &phi, -e)?;
    let fd = (plus - zero - zero + minus) / (e * e);
    let q = hessian_quadratic_form(&f, rho, r, &phi)?;
    Ok(HessianSample {
        quadratic_form: q,
        metric: otto_metric(&f, &phi, &phi)?,
        reference: fd,
        pass: (fd - q).abs() <= T::lit(HESSIAN_FD_TOLERANCE) * q.abs(),
    })
}

/// Result of one quantization descent.
#[derive(Debug, Clone)]
pub struct QuantizeOutcome<T> {
    pub config: PointConfig<T>,
    pub weights: Vec<T>,
    pub energy: T,
    /// `W₂(N⁻¹Σδ, γρ^{1/(r+1)})`.
    pub w2_to_eq: T,
    /// `W₂(Σmᵢδ, ρ)`.
    pub w2_weighted_to_rho: T,
    pub converged: bool,
    pub iterations: usize,
}

pub fn quantize<T: Real, R: Rng + ?Sized>(
    n_points: usize,
    rho: &RhoSpec<T>,
    r: T,
    grid: PeriodicGrid<T>,
    opts: &DescentOptions<T>,
    rng: &mut R,
) -> Result<QuantizeOutcome<T>> {
    let start = PointConfig::stratified(n_points, rng)?;
    let res = descend(&start, rho, r, opts)?;
    let weights = optimal_weights(&res.config, rho);
    let equilibrium = stationary_density(rho, r, grid);
    let rho_density = Density::from_fn(grid, |x| rho.value(x))?;
    Ok(QuantizeOutcome {
        energy: fnr_energy(&res.config, rho, r),
        w2_to_eq: w2_uniform_to(&res.config, &equilibrium)?,
        w2_weighted_to_rho: w2_weighted_to(&res.config, &weights, &rho_density)?,
        weights,
        converged: res.converged,
        iterations: res.iterations,
        config: res.config,
    })
}
