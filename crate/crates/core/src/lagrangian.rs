//! Lagrangian form of the flow: the monotone lift `X(t, θ)` with
//! `f dx = X_# dθ` evolves by the L²-gradient flow of
//! `F[X] = ∫ ρ(X) (∂θX)^{r+1} dθ`,
//!
//! ```text
//! ∂t X = (r+1) ∂θ(ρ(X) (∂θX)^r) − ρ′(X) (∂θX)^{r+1}.
//! ```
//!
//! The discretization is variational: slopes and positions live on the
//! faces `θ_{i+½}`, and the right-hand side is exactly `−h⁻¹ ∇F_h` for the
//! face-quadrature energy `F_h`. This keeps the semi-discrete flow
//! energy-dissipating.

use crate::density::Density;
use crate::error::{Result, VfdError};
use crate::grid::PeriodicGrid;
use crate::linalg::solve_cyclic_tridiagonal;
use crate::map::TransportMap;
use crate::params::Params;
use crate::quadrature;
use crate::rho::RhoSpec;
use crate::scalar::Real;
use crate::transport::{CdfTable, CircleMeasure};

/// Face slopes `s_{i+½}` and midpoints `X_{i+½}`; fails if a slope is not
/// positive.
fn faces<T: Real>(x: &TransportMap<T>) -> Result<(Vec<T>, Vec<T>)> {
    let g = x.grid();
    let h = g.spacing();
    let inc = x.increments();
    if let Some(index) = inc.iter().position(|&d| !(d > T::zero())) {
        return Err(VfdError::MonotonicityLoss {
            index,
            increment: inc[index].to_f64_lossy(),
        });
    }
    let half = T::lit(0.5);
    let mids = x.values().iter().zip(&inc).map(|(&v, &d)| v + half * d).collect();
    Ok((inc.into_iter().map(|d| d / h).collect(), mids))
}

/// Discrete energy `h Σ ρ(X_{i+½}) s_{i+½}^{r+1}`.
pub fn lagrangian_energy<T: Real>(x: &TransportMap<T>, rho: &RhoSpec<T>, r: T) -> Result<T> {
    let (s, mid) = faces(x)?;
    Ok(x.grid()
        .h_sum(s.iter().zip(&mid).map(|(&s, &m)| rho.value(m) * s.powf(r + T::one()))))
}

/// `(r+1) ∂θ(ρ(X)(∂θX)^r) − ρ′(X)(∂θX)^{r+1}` at the nodes.
pub fn lagrangian_rhs<T: Real>(x: &TransportMap<T>, rho: &RhoSpec<T>, r: T) -> Result<Vec<T>> {
    let (s, mid) = faces(x)?;
    Ok(rhs_from_faces(x.grid(), &s, &mid, rho, r))
}

fn rhs_from_faces<T: Real>(g: &PeriodicGrid<T>, s: &[T], mid: &[T], rho: &RhoSpec<T>, r: T) -> Vec<T> {
    let h = g.spacing();
    let r1 = r + T::one();
    let half = T::lit(0.5);
    let flux: Vec<T> = s.iter().zip(mid).map(|(&s, &m)| rho.value(m) * s.powf(r)).collect();
    let force: Vec<T> = s.iter().zip(mid).map(|(&s, &m)| rho.d1(m) * s.powf(r1)).collect();
    (0..g.len())
        .map(|i| {
            let im = g.prev(i);
            r1 * (flux[i] - flux[im]) / h - half * (force[i] + force[im])
        })
        .collect()
}

/// Linearly implicit step: the diffusion part is linearized about the
/// current slopes, `(I − dt L) δ = dt · rhs`, where `L` is the Laplacian
/// with face coefficients `r(r+1) ρ(X_{i+½}) s^{r−1}`. The increment is
/// periodic, so the winding never changes.
pub fn lagrangian_step<T: Real>(x: &TransportMap<T>, rho: &RhoSpec<T>, r: T, dt: T) -> Result<TransportMap<T>> {
    let g = x.grid();
    let n = g.len();
    let h = g.spacing();
    let (s, mid) = faces(x)?;
    let rhs = rhs_from_faces(g, &s, &mid, rho, r);
    let c = dt * r * (r + T::one()) / (h * h);
    let k: Vec<T> = s
        .iter()
        .zip(&mid)
        .map(|(&s, &m)| c * rho.value(m) * s.powf(r - T::one()))
        .collect();
    let mut lower = vec![T::zero(); n];
    let mut diag = vec![T::zero(); n];
    let mut upper = vec![T::zero(); n];
    for i in 0..n {
        let im = g.prev(i);
        lower[i] = -k[im];
        upper[i] = -k[i];
        diag[i] = T::one() + k[i] + k[im];
    }
    let b: Vec<T> = rhs.iter().map(|&v| dt * v).collect();
    let delta = solve_cyclic_tridiagonal(&lower, &diag, &upper, &b)?;
    let values = x.values().iter().zip(&delta).map(|(&v, &d)| v + d).collect();
    TransportMap::new(*g, values)
}

/// Snapshots of a Lagrangian run.
#[derive(Debug, Clone)]
pub struct LagrangianTrajectory<T> {
    pub times: Vec<T>,
    pub maps: Vec<TransportMap<T>>,
    pub energies: Vec<T>,
    pub max_halvings: u32,
}

fn advance<T: Real>(x: &TransportMap<T>, rho: &RhoSpec<T>, r: T, dt: T, level: u32) -> Result<(TransportMap<T>, u32)> {
    match lagrangian_step(x, rho, r, dt) {
        Ok(next) => Ok((next, level)),
        Err(VfdError::MonotonicityLoss { .. }) if level < crate::eulerian::MAX_HALVINGS => {
            let half = dt * T::lit(0.5);
            let (mid, a) = advance(x, rho, r, half, level + 1)?;
            let (end, b) = advance(&mid, rho, r, half, level + 1)?;
            Ok((end, a.max(b)))
        }
        Err(e) => Err(e),
    }
}

/// Runs the Lagrangian flow from `x0`, storing every `output_every`-th
/// step and the final one.
pub fn evolve_lagrangian<T: Real>(
    x0: &TransportMap<T>,
    rho: &RhoSpec<T>,
    p: &Params<T>,
) -> Result<LagrangianTrajectory<T>> {
    p.validate()?;
    x0.check_monotone()?;
    let mut traj = LagrangianTrajectory {
        times: vec![T::zero()],
        maps: vec![x0.clone()],
        energies: vec![lagrangian_energy(x0, rho, p.r)?],
        max_halvings: 0,
    };
    let steps = p.step_count();
    let mut x = x0.clone();
    let mut t = T::zero();
    for k in 1..=steps {
        let target = if k == steps {
            p.t_end
        } else {
            T::from_usize_lossy(k) * p.dt
        };
        let (next, level) = advance(&x, rho, p.r, target - t, 0)?;
        traj.max_halvings = traj.max_halvings.max(level);
        x = next;
        t = target;
        if k % p.output_every == 0 || k == steps {
            traj.times.push(t);
            traj.energies.push(lagrangian_energy(&x, rho, p.r)?);
            traj.maps.push(x.clone());
        }
    }
    Ok(traj)
}

/// Density of `X_# dθ` on the `x`-grid. The values `1/∂θX` at the face
/// midpoints `X_{i+½}` are interpolated linearly (periodically) to the
/// nodes and renormalized.
pub fn pushforward_density<T: Real>(x: &TransportMap<T>) -> Result<Density<T>> {
    let g = *x.grid();
    let n = g.len();
    let (s, mid) = faces(x)?;
    let dens: Vec<T> = s.iter().map(|&s| s.recip()).collect();
    let y0 = mid[0];
    let values = (0..n)
        .map(|j| {
            let xj = g.node(j);
            let y = xj - (xj - y0).floor();
            // mid is increasing on [y0, y0 + 1)
            let k = mid.partition_point(|&m| m <= y).max(1) - 1;
            let (a, fa) = (mid[k], dens[k]);
            let (b, fb) = if k + 1 < n {
                (mid[k + 1], dens[k + 1])
            } else {
                (y0 + T::one(), dens[0])
            };
            fa + (fb - fa) * (y - a) / (b - a)
        })
        .collect();
    Density::normalized(g, values)
}

/// Quantile map `X_i = F⁻¹(θ_i)` of the piecewise-linear CDF of `f`,
/// anchored at `X_0 = 0`.
pub fn quantile_map<T: Real>(f: &Density<T>) -> TransportMap<T> {
    let cdf = CdfTable::new(f);
    let g = *f.grid();
    let values = g.nodes().into_iter().map(|t| cdf.quantile(t)).collect();
    TransportMap::new(g, values).expect("quantiles of a positive density are strictly increasing")
}

/// Quantile map of the continuous equilibrium `γ ρ^{1/(r+1)}`, for which
/// `ρ(X)(∂θX)^{r+1}` is constant.
pub fn equilibrium_map<T: Real>(rho: &RhoSpec<T>, r: T, grid: PeriodicGrid<T>) -> TransportMap<T> {
    let p = (r + T::one()).recip();
    let w = |x: T| rho.value(x).powf(p);
    let n = grid.len();
    let h = grid.spacing();
    let tol = T::lit(1e-15);
    let mut cells = Vec::with_capacity(n + 1);
    let mut acc = T::zero();
    cells.push(acc);
    for i in 0..n {
        acc = acc + quadrature::integrate(w, grid.node(i), grid.node(i) + h, tol);
        cells.push(acc);
    }
    let total = acc;
    let values = (0..n)
        .map(|i| {
            let target = grid.node(i) * total;
            let k = cells.partition_point(|&c| c <= target).clamp(1, n) - 1;
            let (mut lo, mut hi) = (grid.node(k), grid.node(k) + h);
            let mut x = lo;
            for _ in 0..60 {
                let val = cells[k] + quadrature::integrate(w, grid.node(k), x, tol) - target;
                if val > T::zero() {
                    hi = x;
                } else {
                    lo = x;
                }
                let mut next = x - val / w(x);
                if !(next >= lo && next <= hi) {
                    next = (lo + hi) * T::lit(0.5);
                }
                if (next - x).abs() <= T::epsilon() * T::lit(4.0) {
                    x = next;
                    break;
                }
                x = next;
            }
            x
        })
        .collect();
    TransportMap::new(grid, values).expect("equilibrium quantiles are strictly increasing")
}
