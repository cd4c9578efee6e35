//! The finite-`N` quantization energy
//! `F_{N,r}(x¹..x^N) = ∫ min_i |xⁱ − y|^r ρ(y) dy` on the circle, its
//! gradient, and a monotone descent on point configurations.
//!
//! Cells are the arcs between midpoints of circular neighbours; integrals
//! over the two halves of each cell are computed by adaptive Gauss–Kronrod,
//! so kinks of `|x − y|^r` never fall inside a panel.

use rand::Rng;

use crate::density::Density;
use crate::error::{Result, VfdError};
use crate::linalg::solve_cyclic_tridiagonal;
use crate::quadrature;
use crate::rho::RhoSpec;
use crate::scalar::Real;
use crate::transport::{circle_coupling, AtomicMeasure, CdfTable};

/// Minimum circular gap accepted when building a configuration.
pub const MIN_GAP: f64 = 1e-12;
/// Gap below which the descent reports a collision.
pub const COLLISION_GAP: f64 = 1e-10;
const CELL_TOL: f64 = 1e-15;
/// Gradient norm below which the descent tries Newton steps first.
const NEWTON_SWITCH: f64 = 1e-6;
/// Relative diagonal shift; uniform `ρ` leaves rotations as a null mode.
const NEWTON_SHIFT: f64 = 1e-12;

/// Sorted, pairwise distinct points of `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointConfig<T> {
    points: Vec<T>,
}

fn smallest_gap<T: Real>(points: &[T]) -> (usize, T) {
    let n = points.len();
    if n == 1 {
        return (0, T::one());
    }
    (0..n)
        .map(|i| {
            let next = if i + 1 < n { points[i + 1] } else { points[0] + T::one() };
            (i, next - points[i])
        })
        .fold((0, T::infinity()), |a, b| if b.1 < a.1 { b } else { a })
}

impl<T: Real> PointConfig<T> {
    /// Wraps into `[0, 1)` and sorts.
    pub fn new(points: Vec<T>) -> Result<Self> {
        Self::with_min_gap(points, T::lit(MIN_GAP))
    }

    fn with_min_gap(mut points: Vec<T>, gap: T) -> Result<Self> {
        if points.is_empty() {
            return Err(VfdError::InvalidParams(
                "a configuration needs at least one point".into(),
            ));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(VfdError::InvalidParams("points must be finite".into()));
        }
        for p in &mut points {
            *p = *p - p.floor();
            if *p >= T::one() {
                *p = T::zero();
            }
        }
        points.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let (i, g) = smallest_gap(&points);
        if g <= gap {
            return Err(VfdError::PointCollision {
                left: i,
                right: (i + 1) % points.len(),
                gap: g.to_f64_lossy(),
            });
        }
        Ok(Self { points })
    }

    /// `(i + U_i) / N` with independent uniforms `U_i`.
    pub fn stratified<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        let nn = T::from_usize_lossy(n);
        let points = (0..n)
            .map(|i| (T::from_usize_lossy(i) + T::lit(rng.gen_range(0.05..0.95))) / nn)
            .collect();
        Self::new(points)
    }

    /// `N` equally spaced points starting at `offset`.
    pub fn equally_spaced(n: usize, offset: T) -> Result<Self> {
        let nn = T::from_usize_lossy(n);
        Self::new((0..n).map(|i| offset + T::from_usize_lossy(i) / nn).collect())
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Smallest circular gap between neighbours.
    pub fn min_gap(&self) -> T {
        smallest_gap(&self.points).1
    }

    /// Voronoi arc `[left, right]` of point `i` in lifted coordinates.
    pub fn cell(&self, i: usize) -> (T, T) {
        let n = self.points.len();
        let p = self.points[i];
        let half = T::lit(0.5);
        if n == 1 {
            return (p - half, p + half);
        }
        let prev = if i == 0 {
            self.points[n - 1] - T::one()
        } else {
            self.points[i - 1]
        };
        let next = if i + 1 == n {
            self.points[0] + T::one()
        } else {
            self.points[i + 1]
        };
        ((prev + p) * half, (p + next) * half)
    }
}

fn cell_moment<T: Real>(rho: &RhoSpec<T>, p: T, a: T, b: T, exponent: T) -> (T, T) {
    let tol = T::lit(CELL_TOL);
    let left = quadrature::integrate(|y: T| (p - y).powf(exponent) * rho.value(y), a, p, tol);
    let right = quadrature::integrate(|y: T| (y - p).powf(exponent) * rho.value(y), p, b, tol);
    (left, right)
}

/// `F_{N,r}` with the periodic distance.
pub fn fnr_energy<T: Real>(cfg: &PointConfig<T>, rho: &RhoSpec<T>, r: T) -> T {
    (0..cfg.len())
        .map(|i| {
            let (a, b) = cfg.cell(i);
            let (l, rr) = cell_moment(rho, cfg.points[i], a, b, r);
            l + rr
        })
        .sum()
}

/// `∂F/∂xⁱ = r ∫_{cell i} |xⁱ − y|^{r−1} sgn(xⁱ − y) ρ(y) dy`.
pub fn fnr_gradient<T: Real>(cfg: &PointConfig<T>, rho: &RhoSpec<T>, r: T) -> Vec<T> {
    (0..cfg.len())
        .map(|i| {
            let (a, b) = cfg.cell(i);
            let (l, rr) = cell_moment(rho, cfg.points[i], a, b, r - T::one());
            r * (l - rr)
        })
        .collect()
}

/// Cyclic tridiagonal Hessian `(lower, diag, upper)` of `F_{N,r}`, `N ≥ 3`.
///
/// The diagonal holds `r(r−1) ∫_{cell} |x − y|^{r−2} ρ` minus the two
/// midpoint terms, written with `u = |x − y|^{r−1}` so that `r < 2` stays
/// integrable.
pub fn fnr_hessian<T: Real>(cfg: &PointConfig<T>, rho: &RhoSpec<T>, r: T) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let n = cfg.len();
    if n < 3 {
        return Err(VfdError::InvalidParams("Hessian needs at least 3 points".into()));
    }
    let tol = T::lit(CELL_TOL);
    let half = T::lit(0.5);
    let q = r - T::one();
    let inv = q.recip();
    let (mut lower, mut diag, mut upper) = (vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]);
    for i in 0..n {
        let p = cfg.points[i];
        let (a, b) = cfg.cell(i);
        let (ul, ur) = ((p - a).powf(q), (b - p).powf(q));
        let left = quadrature::integrate(|u: T| rho.value(p - u.powf(inv)), T::zero(), ul, tol);
        let right = quadrature::integrate(|u: T| rho.value(p + u.powf(inv)), T::zero(), ur, tol);
        lower[i] = -half * r * rho.value(a) * ul;
        upper[i] = -half * r * rho.value(b) * ur;
        diag[i] = r * (left + right) + lower[i] + upper[i];
    }
    Ok((lower, diag, upper))
}

/// Cell masses `mᵢ = ∫_{cell i} ρ`, exact from the antiderivative of `ρ`.
pub fn optimal_weights<T: Real>(cfg: &PointConfig<T>, rho: &RhoSpec<T>) -> Vec<T> {
    (0..cfg.len())
        .map(|i| {
            let (a, b) = cfg.cell(i);
            rho.cumulative(b) - rho.cumulative(a)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentOptions<T> {
    /// Stop once `‖∇F‖∞ ≤ tol`.
    pub tol: T,
    pub max_iter: usize,
    /// First trial step; later steps use the Barzilai–Borwein length.
    pub initial_step: T,
}

impl<T: Real> Default for DescentOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-10),
            max_iter: 10_000,
            initial_step: T::one(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DescentResult<T> {
    pub config: PointConfig<T>,
    /// Energy after every accepted iteration, starting with the initial one.
    pub energies: Vec<T>,
    pub grad_norm: T,
    pub iterations: usize,
    pub converged: bool,
}

struct Search<T> {
    accepted: Option<(PointConfig<T>, T, T)>,
    collided: Option<VfdError>,
    alpha: T,
}

/// Backtracking along `dir`: halve until the configuration stays ordered
/// and the energy decreases (or sits at its rounding floor while the
/// gradient shrinks).
#[allow(clippy::too_many_arguments)]
fn line_search<T: Real>(
    x: &[T],
    dir: &[T],
    mut alpha: T,
    tries: usize,
    energy: T,
    grad_norm: T,
    rho: &RhoSpec<T>,
    r: T,
) -> Search<T> {
    let n = x.len();
    let collision = T::lit(COLLISION_GAP);
    let roundoff = T::lit(8.0) * T::epsilon();
    let mut collided = None;
    for _ in 0..tries {
        let trial: Vec<T> = x.iter().zip(dir).map(|(&p, &d)| p + alpha * d).collect();
        // order must survive in lifted coordinates
        let ordered = (0..n).all(|k| {
            let next = if k + 1 < n { trial[k + 1] } else { trial[0] + T::one() };
            n == 1 || next - trial[k] >= collision
        });
        if ordered {
            match PointConfig::with_min_gap(trial, T::zero()) {
                Ok(cfg) => {
                    let e = fnr_energy(&cfg, rho, r);
                    let flat = e <= energy + roundoff * energy.abs()
                        && crate::grid::max_abs(&fnr_gradient(&cfg, rho, r)) < grad_norm;
                    if e < energy || flat {
                        return Search {
                            accepted: Some((cfg, e, alpha)),
                            collided,
                            alpha,
                        };
                    }
                }
                Err(err) => collided = Some(err),
            }
        } else if collided.is_none() {
            let (k, gap) = smallest_gap(&trial);
            collided = Some(VfdError::PointCollision {
                left: k,
                right: (k + 1) % n,
                gap: gap.to_f64_lossy(),
            });
        }
        alpha = alpha * T::lit(0.5);
    }
    Search {
        accepted: None,
        collided,
        alpha,
    }
}

/// Levenberg–Marquardt step: the diagonal shift grows until the direction
/// descends and the line search accepts it.
fn newton_step<T: Real>(x: &[T], grad: &[T], energy: T, rho: &RhoSpec<T>, r: T) -> Option<(PointConfig<T>, T, Vec<T>)> {
    let cfg = PointConfig { points: x.to_vec() };
    let (lower, diag, upper) = fnr_hessian(&cfg, rho, r).ok()?;
    let scale = crate::grid::max_abs(&diag);
    let rhs: Vec<T> = grad.iter().map(|&g| -g).collect();
    let gnorm = crate::grid::max_abs(grad);
    let mut shift = T::lit(NEWTON_SHIFT) * scale;
    for _ in 0..8 {
        let shifted: Vec<T> = diag.iter().map(|&d| d + shift).collect();
        shift = shift * T::lit(100.0);
        let Ok(dir) = solve_cyclic_tridiagonal(&lower, &shifted, &upper, &rhs) else {
            continue;
        };
        let slope: T = dir.iter().zip(grad).map(|(&d, &g)| d * g).sum();
        if !slope.is_finite() || slope >= T::zero() {
            continue;
        }
        if let Some((cfg, e, alpha)) = line_search(x, &dir, T::one(), 20, energy, gnorm, rho, r).accepted {
            let moved = dir.iter().map(|&d| alpha * d).collect();
            return Some((cfg, e, moved));
        }
    }
    None
}

/// Gradient descent with Barzilai–Borwein steps and backtracking, switching
/// to shifted Newton steps once the gradient is small: near the minimum BB
/// crawls along weakly curved modes.
pub fn descend<T: Real>(
    cfg0: &PointConfig<T>,
    rho: &RhoSpec<T>,
    r: T,
    opts: &DescentOptions<T>,
) -> Result<DescentResult<T>> {
    if !(r > T::one()) {
        return Err(VfdError::InvalidParams("descent needs r > 1".into()));
    }
    let (i, g) = smallest_gap(cfg0.points());
    if cfg0.len() > 1 && g < T::lit(COLLISION_GAP) {
        return Err(VfdError::PointCollision {
            left: i,
            right: (i + 1) % cfg0.len(),
            gap: g.to_f64_lossy(),
        });
    }
    let n = cfg0.len();
    let mut x = cfg0.points().to_vec();
    let mut energy = fnr_energy(cfg0, rho, r);
    let mut grad = fnr_gradient(cfg0, rho, r);
    let mut energies = vec![energy];
    let mut step = opts.initial_step;
    let norm = |g: &[T]| crate::grid::max_abs(g);
    let mut iterations = 0;
    while iterations < opts.max_iter && norm(&grad) > opts.tol {
        let newton = (n >= 3 && norm(&grad) <= T::lit(NEWTON_SWITCH))
            .then(|| newton_step(&x, &grad, energy, rho, r))
            .flatten();
        let (cfg, e, moved) = match newton {
            Some(found) => found,
            None => {
                let dir: Vec<T> = grad.iter().map(|&g| -g).collect();
                let search = line_search(&x, &dir, step, 80, energy, norm(&grad), rho, r);
                let Some((cfg, e, alpha)) = search.accepted else {
                    if let Some(err) = search.collided.filter(|_| search.alpha < T::epsilon()) {
                        return Err(err);
                    }
                    break;
                };
                (cfg, e, dir.iter().map(|&d| alpha * d).collect())
            }
        };
        let new_grad = fnr_gradient(&cfg, rho, r);
        // Barzilai–Borwein length from the lifted displacement; the wrap
        // only relabels points, so compare in the unwrapped frame
        let aligned = align_gradient(&x, &moved, cfg.points(), &new_grad);
        let sy: T = moved
            .iter()
            .zip(aligned.iter().zip(&grad))
            .map(|(&s, (&gn, &go))| s * (gn - go))
            .sum();
        let ss: T = moved.iter().map(|&s| s * s).sum();
        step = if sy > T::zero() { ss / sy } else { step + step };
        x = cfg.points().to_vec();
        grad = new_grad;
        energy = e;
        energies.push(e);
        iterations += 1;
    }
    let converged = norm(&grad) <= opts.tol;
    Ok(DescentResult {
        config: PointConfig { points: x },
        energies,
        grad_norm: norm(&grad),
        iterations,
        converged,
    })
}

/// Reorders `new_grad` (indexed by the wrapped, sorted `new_points`) to
/// match the labels of `old_points` moved by `moved`.
fn align_gradient<T: Real>(old_points: &[T], moved: &[T], new_points: &[T], new_grad: &[T]) -> Vec<T> {
    let n = old_points.len();
    let first = {
        let p = old_points[0] + moved[0];
        let w = p - p.floor();
        new_points
            .iter()
            .enumerate()
            .map(|(k, &q)| (k, (q - w).abs()))
            .fold((0, T::infinity()), |a, b| if b.1 < a.1 { b } else { a })
            .0
    };
    (0..n).map(|i| new_grad[(first + i) % n]).collect()
}

/// `W₂` between the counting measure `N⁻¹ Σ δ_{xⁱ}` and a grid density.
pub fn w2_uniform_to<T: Real>(cfg: &PointConfig<T>, target: &Density<T>) -> Result<T> {
    let atoms = AtomicMeasure::uniform(cfg.points())?;
    Ok(circle_coupling(&atoms, &CdfTable::new(target)).distance())
}

/// `W₂` between `Σ mᵢ δ_{xⁱ}` and a grid density.
pub fn w2_weighted_to<T: Real>(cfg: &PointConfig<T>, weights: &[T], target: &Density<T>) -> Result<T> {
    let atoms = AtomicMeasure::new(cfg.points(), weights)?;
    Ok(circle_coupling(&atoms, &CdfTable::new(target)).distance())
}
