//! Scalar functionals of a density, the contraction constant and the
//! Hessian of the energy in the Wasserstein geometry.

use crate::density::Density;
use crate::error::{Result, VfdError};
use crate::grid::{min_max, PeriodicGrid};
use crate::rho::RhoSpec;
use crate::scalar::Real;
use crate::transport::{density_coupling, CdfTable};

/// Equilibrium `γ ρ^{1/(r+1)}` normalized by the grid quadrature.
pub fn stationary_density<T: Real>(rho: &RhoSpec<T>, r: T, grid: PeriodicGrid<T>) -> Density<T> {
    let p = (r + T::one()).recip();
    Density::from_fn(grid, |x| rho.value(x).powf(p)).expect("rho is positive")
}

/// `γ = 1 / ∫ρ^{1/(r+1)}` on the grid.
pub fn gamma<T: Real>(rho: &RhoSpec<T>, r: T, grid: PeriodicGrid<T>) -> T {
    let p = (r + T::one()).recip();
    grid.integrate(&grid.sample(|x| rho.value(x).powf(p))).recip()
}

fn rho_nodes<T: Real>(rho: &RhoSpec<T>, grid: &PeriodicGrid<T>, order: u8) -> Vec<T> {
    rho.sample(order, &grid.nodes())
}

/// `F_ρ[f] = ∫ ρ / f^r`.
pub fn energy<T: Real>(f: &Density<T>, rho: &RhoSpec<T>, r: T) -> T {
    let g = f.grid();
    let rv = rho_nodes(rho, g, 0);
    energy_with(g, f.values(), &rv, r)
}

fn energy_with<T: Real>(g: &PeriodicGrid<T>, f: &[T], rho: &[T], r: T) -> T {
    g.h_sum(f.iter().zip(rho).map(|(&fi, &ri)| ri * fi.powf(-r)))
}

/// `r² ∫ f |∂x(ρ / f^{r+1})|²` with centered differences.
pub fn dissipation<T: Real>(f: &Density<T>, rho: &RhoSpec<T>, r: T) -> T {
    let g = f.grid();
    let rv = rho_nodes(rho, g, 0);
    dissipation_with(g, f.values(), &rv, r)
}

fn dissipation_with<T: Real>(g: &PeriodicGrid<T>, f: &[T], rho: &[T], r: T) -> T {
    let q: Vec<T> = f
        .iter()
        .zip(rho)
        .map(|(&fi, &ri)| ri * fi.powf(-(r + T::one())))
        .collect();
    let dq = g.d_dx(&q);
    r * r * g.h_sum(f.iter().zip(&dq).map(|(&fi, &d)| fi * d * d))
}

/// `α = ∫ ρ^{1/(r+1)} / f`.
pub fn alpha<T: Real>(f: &Density<T>, rho: &RhoSpec<T>, r: T) -> T {
    let g = f.grid();
    let p = (r + T::one()).recip();
    let rv = rho_nodes(rho, g, 0);
    g.h_sum(f.values().iter().zip(&rv).map(|(&fi, &ri)| ri.powf(p) / fi))
}

/// `∫ G` with the envelope constants `b ‖f − f∞‖² ≤ ∫G ≤ B ‖f − f∞‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulatedEnergy<T> {
    pub integral: T,
    pub lower: T,
    pub upper: T,
    /// Range `[a, A]` containing both `f` and `f∞` that the constants use.
    pub a: T,
    pub big_a: T,
}

/// Pointwise Taylor remainder of `s ↦ ρ s^{-r}` around `f∞`,
/// `ρ f∞^{-r} [(1 + e)^{-r} − 1 + r e]` with `e = s / f∞ − 1`.
fn remainder<T: Real>(rho: T, s: T, s0: T, r: T) -> T {
    let e = s / s0 - T::one();
    let shifted = (-r * e.ln_1p()).exp_m1();
    rho * s0.powf(-r) * (shifted + r * e)
}

pub fn modulated_energy<T: Real>(f: &Density<T>, rho: &RhoSpec<T>, r: T) -> ModulatedEnergy<T> {
    let g = f.grid();
    let finf = stationary_density(rho, r, *g);
    let rv = rho_nodes(rho, g, 0);
    modulated_with(g, f.values(), finf.values(), &rv, rho.lambda(), r)
}

fn modulated_with<T: Real>(g: &PeriodicGrid<T>, f: &[T], finf: &[T], rho: &[T], lambda: T, r: T) -> ModulatedEnergy<T> {
    let integral = g.h_sum((0..f.len()).map(|i| remainder(rho[i], f[i], finf[i], r)));
    let (lo_f, hi_f) = min_max(f);
    let (lo_e, hi_e) = min_max(finf);
    let a = lo_f.min(lo_e);
    let big_a = hi_f.max(hi_e);
    let c = r * (r + T::one()) * T::lit(0.5);
    ModulatedEnergy {
        integral,
        lower: c * lambda / big_a.powf(r + T::lit(2.0)),
        upper: c / (lambda * a.powf(r + T::lit(2.0))),
        a,
        big_a,
    }
}

/// Closed-form minimizer of `β ↦ ∫ |β ρ^{1/(2(r+1))} − f / ρ^{1/(2(r+1))}|²`
/// and the minimal value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaProjection<T> {
    pub beta: T,
    pub residual: T,
}

pub fn beta_projection<T: Real>(f: &Density<T>, rho: &RhoSpec<T>, r: T) -> BetaProjection<T> {
    let g = f.grid();
    let p = (r + T::one()).recip();
    let w2: Vec<T> = rho_nodes(rho, g, 0).iter().map(|&v| v.powf(p)).collect();
    let beta = g.integrate(f.values()) / g.integrate(&w2);
    // (β w − f/w)² = (β w² − f)² / w²
    let residual = g.h_sum(f.values().iter().zip(&w2).map(|(&fi, &wi)| {
        let d = beta * wi - fi;
        d * d / wi
    }));
    BetaProjection { beta, residual }
}

/// Inputs to the contraction constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HessianBoundInputs<T> {
    pub lambda: T,
    pub a: T,
    pub big_a: T,
    pub r: T,
    pub eta1: T,
    pub eta2: T,
}

impl<T: Real> HessianBoundInputs<T> {
    pub fn new(lambda: T, a: T, big_a: T, r: T, eta1: T, eta2: T) -> Result<Self> {
        let inp = Self {
            lambda,
            a,
            big_a,
            r,
            eta1,
            eta2,
        };
        inp.validate()?;
        Ok(inp)
    }

    /// Bounds for densities in `[a, A]` under the given `ρ`.
    pub fn for_rho(rho: &RhoSpec<T>, r: T, a: T, big_a: T) -> Result<Self> {
        Self::new(rho.lambda(), a, big_a, r, rho.eta1(), rho.eta2())
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.a > T::zero()
            && self.a <= self.big_a
            && self.lambda > T::zero()
            && self.lambda <= T::one()
            && self.eta1 >= T::zero()
            && self.eta2 >= T::zero()
            && self.r > T::one();
        if ok {
            Ok(())
        } else {
            Err(VfdError::InvalidParams(format!(
                "inadmissible contraction inputs {self:?}"
            )))
        }
    }
}

/// `μ = (1/A) [r(r+1)λ/A^r − 2η₁²(r+1)A^r/(rλa^{2r}) − η₂/a^r]`; may be
/// negative, in which case nothing is certified.
pub fn mu_lower_bound<T: Real>(inp: &HessianBoundInputs<T>) -> T {
    let HessianBoundInputs {
        lambda,
        a,
        big_a,
        r,
        eta1,
        eta2,
    } = *inp;
    let r1 = r + T::one();
    let lead = r * r1 * lambda / big_a.powf(r);
    let mixed = T::lit(2.0) * eta1 * eta1 * r1 * big_a.powf(r) / (r * lambda * a.powf(r + r));
    let curv = eta2 / a.powf(r);
    (lead - mixed - curv) / big_a
}

/// `2(r+1)∫ρ′φ′φ″/f^r + r(r+1)∫ρφ″²/f^r + ∫ρ″φ′²/f^r`, with `φ′` centered
/// and `φ″` compact.
pub fn hessian_quadratic_form<T: Real>(f: &Density<T>, rho: &RhoSpec<T>, r: T, phi: &[T]) -> Result<T> {
    let g = f.grid();
    g.check_len(phi)?;
    let nodes = g.nodes();
    let d1 = g.d_dx(phi);
    let d2 = g.d2_dx2(phi);
    let r1 = r + T::one();
    let two = T::lit(2.0);
    Ok(g.h_sum((0..g.len()).map(|i| {
        let x = nodes[i];
        let w = f.values()[i].powf(-r);
        w * (two * r1 * rho.d1(x) * d1[i] * d2[i] + r * r1 * rho.value(x) * d2[i] * d2[i] + rho.d2(x) * d1[i] * d1[i])
    })))
}

/// First variation `−∫ρ′φ′/f^r − (r+1)∫ρφ″/f^r`, the derivative of the
/// energy along `s ↦ (id − s∂xφ)_# f`.
pub fn first_variation<T: Real>(f: &Density<T>, rho: &RhoSpec<T>, r: T, phi: &[T]) -> Result<T> {
    let g = f.grid();
    g.check_len(phi)?;
    let nodes = g.nodes();
    let d1 = g.d_dx(phi);
    let d2 = g.d2_dx2(phi);
    let r1 = r + T::one();
    Ok(-g.h_sum((0..g.len()).map(|i| {
        let x = nodes[i];
        (rho.d1(x) * d1[i] + r1 * rho.value(x) * d2[i]) * f.values()[i].powf(-r)
    })))
}

/// Energy of `(id − s∂xφ)_# f` by the Lagrangian change of variables
/// `∫ ρ(x − sφ′) (1 − sφ″)^{r+1} / f^r`, using the same difference
/// operators as [`hessian_quadratic_form`].
pub fn energy_along_geodesic<T: Real>(f: &Density<T>, rho: &RhoSpec<T>, r: T, phi: &[T], s: T) -> Result<T> {
    let g = f.grid();
    g.check_len(phi)?;
    let nodes = g.nodes();
    let d1 = g.d_dx(phi);
    let d2 = g.d2_dx2(phi);
    let mut acc = T::zero();
    for i in 0..g.len() {
        let jac = T::one() - s * d2[i];
        if !(jac > T::zero()) {
            return Err(VfdError::MonotonicityLoss {
                index: i,
                increment: jac.to_f64_lossy(),
            });
        }
        acc = acc + rho.value(nodes[i] - s * d1[i]) * jac.powf(r + T::one()) * f.values()[i].powf(-r);
    }
    Ok(acc * g.spacing())
}

/// Otto metric `∫ f ∂xφ₁ ∂xφ₂` in the compact face form
/// `h Σ f_{i+½} D⁺φ₁ D⁺φ₂`, which is exactly dual to [`solve_potential`].
pub fn otto_metric<T: Real>(f: &Density<T>, phi1: &[T], phi2: &[T]) -> Result<T> {
    let g = f.grid();
    g.check_len(phi1)?;
    g.check_len(phi2)?;
    let fm = g.face_mean(f.values());
    let d1 = g.face_diff(phi1);
    let d2 = g.face_diff(phi2);
    Ok(g.h_sum((0..g.len()).map(|i| fm[i] * d1[i] * d2[i])))
}

/// Discrete divergence form `∂x(f ∂xφ)` matching [`solve_potential`].
pub fn weighted_laplacian<T: Real>(f: &Density<T>, phi: &[T]) -> Vec<T> {
    let g = f.grid();
    let fm = g.face_mean(f.values());
    let d = g.face_diff(phi);
    let h = g.spacing();
    (0..g.len())
        .map(|i| (fm[i] * d[i] - fm[g.prev(i)] * d[g.prev(i)]) / h)
        .collect()
}

/// Mean-free `φ` with `∂x(f ∂xφ) = δf`.
pub fn solve_potential<T: Real>(f: &Density<T>, delta_f: &[T]) -> Result<Vec<T>> {
    let g = f.grid();
    g.check_len(delta_f)?;
    let integral = g.integrate(delta_f);
    if integral.abs() > T::lit(1e-10) {
        return Err(VfdError::NotMeanFree {
            integral: integral.to_f64_lossy(),
        });
    }
    let n = g.len();
    let h = g.spacing();
    let h2 = h * h;
    let fm = g.face_mean(f.values());
    // pin φ₀ = 0 and solve the remaining rows, which then form a plain
    // tridiagonal system in φ₁..φ_{n−1}
    let m = n - 1;
    let mut lower = vec![T::zero(); m];
    let mut diag = vec![T::zero(); m];
    let mut upper = vec![T::zero(); m];
    let mut rhs = vec![T::zero(); m];
    for k in 0..m {
        let i = k + 1;
        let left = fm[i - 1];
        let right = fm[i];
        lower[k] = left;
        diag[k] = -(left + right);
        upper[k] = right;
        rhs[k] = delta_f[i] * h2;
    }
    lower[0] = T::zero();
    upper[m - 1] = T::zero();
    let inner = crate::linalg::solve_tridiagonal(&lower, &diag, &upper, &rhs)?;
    let mut phi = Vec::with_capacity(n);
    phi.push(T::zero());
    phi.extend(inner);
    let mean = g.integrate(&phi);
    for p in &mut phi {
        *p = *p - mean;
    }
    Ok(phi)
}

/// Least-squares fit of `log y = log C − c t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit<T> {
    pub rate: T,
    pub prefactor: T,
    /// Largest absolute residual in `log y`.
    pub residual: T,
    pub samples: usize,
}

pub const MIN_FIT_SAMPLES: usize = 10;

pub fn fit_decay_rate<T: Real>(series: &[(T, T)], window: (T, T)) -> Result<DecayFit<T>> {
    let rows: Vec<(T, T)> = series
        .iter()
        .copied()
        .filter(|&(t, _)| t >= window.0 && t <= window.1)
        .collect();
    if rows.len() < MIN_FIT_SAMPLES {
        return Err(VfdError::InsufficientData {
            needed: MIN_FIT_SAMPLES,
            got: rows.len(),
        });
    }
    if let Some(&(t, value)) = rows.iter().find(|&&(_, v)| !(v > T::zero())) {
        return Err(VfdError::NonPositiveValue {
            t: t.to_f64_lossy(),
            value: value.to_f64_lossy(),
        });
    }
    let k = T::from_usize_lossy(rows.len());
    let tm = rows.iter().map(|r| r.0).sum::<T>() / k;
    let ym = rows.iter().map(|r| r.1.ln()).sum::<T>() / k;
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for &(t, v) in &rows {
        let dt = t - tm;
        sxy = sxy + dt * (v.ln() - ym);
        sxx = sxx + dt * dt;
    }
    if !(sxx > T::zero()) {
        return Err(VfdError::InsufficientData { needed: 2, got: 1 });
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    let residual = rows
        .iter()
        .map(|&(t, v)| (v.ln() - intercept - slope * t).abs())
        .fold(T::zero(), T::max);
    Ok(DecayFit {
        rate: -slope,
        prefactor: intercept.exp(),
        residual,
        samples: rows.len(),
    })
}

/// Per-snapshot diagnostics record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSeriesRow<T> {
    pub t: T,
    pub energy: T,
    pub dissipation: T,
    pub l2_error: T,
    pub min_f: T,
    pub max_f: T,
    pub alpha: T,
    pub w2_to_eq: T,
    pub g_integral: T,
}

impl<T: Real> TimeSeriesRow<T> {
    pub const HEADER: &'static str = "t,energy,dissipation,l2_error,min_f,max_f,alpha,w2_to_eq,g_integral";

    pub fn fields(&self) -> [T; 9] {
        [
            self.t,
            self.energy,
            self.dissipation,
            self.l2_error,
            self.min_f,
            self.max_f,
            self.alpha,
            self.w2_to_eq,
            self.g_integral,
        ]
    }
}

/// Cached `ρ`-dependent data for producing [`TimeSeriesRow`]s on one grid.
#[derive(Debug, Clone)]
pub struct RowBuilder<T> {
    grid: PeriodicGrid<T>,
    r: T,
    lambda: T,
    rho: Vec<T>,
    root: Vec<T>,
    equilibrium: Density<T>,
    equilibrium_cdf: CdfTable<T>,
    with_w2: bool,
}

impl<T: Real> RowBuilder<T> {
    pub fn new(rho: &RhoSpec<T>, r: T, grid: PeriodicGrid<T>) -> Self {
        let equilibrium = stationary_density(rho, r, grid);
        let p = (r + T::one()).recip();
        let rv = rho_nodes(rho, &grid, 0);
        Self {
            grid,
            r,
            lambda: rho.lambda(),
            root: rv.iter().map(|&v| v.powf(p)).collect(),
            rho: rv,
            equilibrium_cdf: CdfTable::new(&equilibrium),
            equilibrium,
            with_w2: true,
        }
    }

    /// Skips the transport distance, which dominates the row cost.
    pub fn without_w2(mut self) -> Self {
        self.with_w2 = false;
        self
    }

    pub fn equilibrium(&self) -> &Density<T> {
        &self.equilibrium
    }

    pub fn row(&self, t: T, f: &Density<T>) -> Result<TimeSeriesRow<T>> {
        let g = &self.grid;
        if f.grid() != g {
            return Err(VfdError::GridMismatch {
                left: g.len(),
                right: f.grid().len(),
            });
        }
        let v = f.values();
        let (min_f, max_f) = min_max(v);
        let w2_to_eq = if self.with_w2 {
            density_coupling(&CdfTable::new(f), &self.equilibrium_cdf).distance()
        } else {
            T::nan()
        };
        Ok(TimeSeriesRow {
            t,
            energy: energy_with(g, v, &self.rho, self.r),
            dissipation: dissipation_with(g, v, &self.rho, self.r),
            l2_error: f.l2_distance(&self.equilibrium)?,
            min_f,
            max_f,
            alpha: g.h_sum(v.iter().zip(&self.root).map(|(&fi, &mi)| mi / fi)),
            w2_to_eq,
            g_integral: modulated_with(g, v, self.equilibrium.values(), &self.rho, self.lambda, self.r).integral,
        })
    }
}
