//! One-dimensional optimal transport on the circle.
//!
//! Measures are handled through their lifted quantile functions
//! `Q(t + 1) = Q(t) + 1`. For a cost that is convex in the displacement the
//! circle problem reduces to a one-parameter family of interval problems,
//!
//! ```text
//! W₂²(μ, ν) = min_θ ∫₀¹ |Q_μ(t) − Q_ν(t + θ)|² dt,
//! ```
//!
//! and the objective is convex in the mass shift `θ`, whose minimizer lies
//! in `[-1, 1]`.
//!
//! Grid densities are read as periodic piecewise-linear functions of `x`,
//! which makes their CDF piecewise quadratic and keeps every operation here
//! second-order accurate.

use crate::density::Density;
use crate::error::{Result, VfdError};
use crate::grid::PeriodicGrid;
use crate::map::TransportMap;
use crate::scalar::Real;

const GL_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

/// Shift tolerance for the circle minimization.
pub const SHIFT_TOLERANCE: f64 = 1e-10;

/// A probability measure on the circle, seen through its lifted quantile.
pub trait CircleMeasure<T: Real> {
    /// Lifted quantile, `Q(t + 1) = Q(t) + 1`.
    fn quantile(&self, t: T) -> T;
    /// Sorted points of `[0, 1)` where the quantile is not smooth.
    fn breakpoints(&self) -> &[T];
}

/// Cumulative table of a grid density read as a periodic piecewise-linear
/// function, anchored so that `F(0) = 0`.
#[derive(Debug, Clone)]
pub struct CdfTable<T> {
    grid: PeriodicGrid<T>,
    /// Nodal density values scaled to exact unit trapezoid mass.
    values: Vec<T>,
    /// `F(x_i)` for `i = 0..=n`, with `F(x_n) = 1`.
    cumulative: Vec<T>,
}

impl<T: Real> CdfTable<T> {
    pub fn new(f: &Density<T>) -> Self {
        let grid = *f.grid();
        let n = grid.len();
        let h = grid.spacing();
        let mass = f.mass();
        let values: Vec<T> = f.values().iter().map(|&v| v / mass).collect();
        let half = T::lit(0.5);
        let mut cumulative = Vec::with_capacity(n + 1);
        let mut acc = T::zero();
        cumulative.push(acc);
        for i in 0..n {
            acc = acc + h * half * (values[i] + values[grid.next(i)]);
            cumulative.push(acc);
        }
        // remove the last rounding residue so the lift is exact
        let total = cumulative[n];
        for c in cumulative.iter_mut() {
            *c = *c / total;
        }
        cumulative[n] = T::one();
        Self {
            grid,
            values,
            cumulative,
        }
    }

    pub fn grid(&self) -> &PeriodicGrid<T> {
        &self.grid
    }

    /// Nodal cumulative values `F(x_i)`, `i = 0..=n`.
    pub fn cumulative_values(&self) -> &[T] {
        &self.cumulative
    }

    /// Density value (piecewise linear) at any real `x`.
    pub fn density_at(&self, x: T) -> T {
        let (j, s) = self.locate_x(x);
        let h = self.grid.spacing();
        let a = self.values[j];
        let b = self.values[self.grid.next(j)];
        a + (b - a) * s / h
    }

    /// Lifted CDF `F(x)`, `F(x + 1) = F(x) + 1`.
    pub fn cdf(&self, x: T) -> T {
        let wraps = x.floor();
        let (j, s) = self.locate_x(x);
        let a = self.values[j];
        let b = self.values[self.grid.next(j)];
        let h = self.grid.spacing();
        self.cumulative[j] + a * s + (b - a) * s * s / (h + h) + wraps
    }

    fn locate_x(&self, x: T) -> (usize, T) {
        let n = self.grid.len();
        let y = x - x.floor();
        let pos = y * T::from_usize_lossy(n);
        let j = pos.floor().to_usize().unwrap_or(0).min(n - 1);
        let s = y - T::from_usize_lossy(j) * self.grid.spacing();
        (j, s.max(T::zero()))
    }

    /// Quantile together with its first and second derivative in `t`.
    pub fn quantile_derivs(&self, t: T) -> (T, T, T) {
        let n = self.grid.len();
        let h = self.grid.spacing();
        let wraps = t.floor();
        let tau = t - wraps;
        // segment j with F_j <= tau < F_{j+1}
        let j = self.cumulative[1..n].partition_point(|&c| c <= tau);
        let a = self.values[j];
        let b = self.values[self.grid.next(j)];
        let slope = (b - a) / h;
        let local = (tau - self.cumulative[j]).max(T::zero());
        let disc = (a * a + (slope + slope) * local).max(T::zero());
        let root = disc.sqrt();
        let s = (local + local) / (a + root);
        let dens = root;
        let q = T::from_usize_lossy(j) * h + s + wraps;
        let dq = dens.recip();
        let d2q = -slope / (dens * dens * dens);
        (q, dq, d2q)
    }
}

impl<T: Real> CircleMeasure<T> for CdfTable<T> {
    fn quantile(&self, t: T) -> T {
        self.quantile_derivs(t).0
    }

    fn breakpoints(&self) -> &[T] {
        &self.cumulative[..self.grid.len()]
    }
}

/// Finite combination of point masses on the circle.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure<T> {
    points: Vec<T>,
    weights: Vec<T>,
    /// Cumulative weights `W_k = Σ_{j<k} w_j`.
    breaks: Vec<T>,
}

impl<T: Real> AtomicMeasure<T> {
    /// Points are wrapped into `[0, 1)` and sorted; weights are normalized.
    pub fn new(points: &[T], weights: &[T]) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(VfdError::InvalidParams(
                "atomic measure needs matching, non-empty points and weights".into(),
            ));
        }
        if let Some(index) = weights.iter().position(|&w| !(w > T::zero() && w.is_finite())) {
            return Err(VfdError::NonPositive {
                index,
                value: weights[index].to_f64_lossy(),
            });
        }
        let mut pairs: Vec<(T, T)> = points.iter().zip(weights).map(|(&p, &w)| (p - p.floor(), w)).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite points"));
        let total: T = weights.iter().copied().sum();
        let mut breaks = Vec::with_capacity(pairs.len());
        let mut acc = T::zero();
        for &(_, w) in &pairs {
            breaks.push(acc);
            acc = acc + w / total;
        }
        Ok(Self {
            points: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1 / total).collect(),
            breaks,
        })
    }

    pub fn uniform(points: &[T]) -> Result<Self> {
        Self::new(points, &vec![T::one(); points.len()])
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }
}

impl<T: Real> CircleMeasure<T> for AtomicMeasure<T> {
    fn quantile(&self, t: T) -> T {
        let wraps = t.floor();
        let tau = t - wraps;
        let k = self.breaks.partition_point(|&b| b <= tau).max(1) - 1;
        self.points[k] + wraps
    }

    fn breakpoints(&self) -> &[T] {
        &self.breaks
    }
}

/// Optimal mass shift and the transport cost it realizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleCoupling<T> {
    pub shift: T,
    pub cost: T,
}

impl<T: Real> CircleCoupling<T> {
    pub fn distance(&self) -> T {
        self.cost.max(T::zero()).sqrt()
    }
}

/// Sorted partition of `[0, 1]` by the breakpoints of `Q_a(t)` and `Q_b(t + θ)`.
fn partition<T: Real>(a: &[T], b: &[T], shift: T) -> Vec<T> {
    let mut cuts = Vec::with_capacity(a.len() + b.len() + 2);
    cuts.push(T::zero());
    cuts.extend_from_slice(a);
    for &c in b {
        let t = c - shift;
        cuts.push(t - t.floor());
    }
    cuts.push(T::one());
    cuts.sort_by(|x, y| x.partial_cmp(y).expect("finite breakpoints"));
    cuts.dedup();
    cuts
}

fn for_each_node<T: Real>(cuts: &[T], mut body: impl FnMut(T, T)) {
    let half = T::lit(0.5);
    for w in cuts.windows(2) {
        let len = w[1] - w[0];
        if len <= T::zero() {
            continue;
        }
        let mid = (w[0] + w[1]) * half;
        for (&x, &wt) in GL_NODES.iter().zip(&GL_WEIGHTS) {
            body(mid + half * len * T::lit(x), half * len * T::lit(wt));
        }
    }
}

/// `∫₀¹ |Q_a(t) − Q_b(t + θ)|² dt`, piecewise Gauss–Legendre on the merged
/// breakpoints.
pub fn shifted_cost<T: Real, A: CircleMeasure<T> + ?Sized, B: CircleMeasure<T> + ?Sized>(a: &A, b: &B, shift: T) -> T {
    let cuts = partition(a.breakpoints(), b.breakpoints(), shift);
    let mut acc = T::zero();
    for_each_node(&cuts, |t, w| {
        let d = a.quantile(t) - b.quantile(t + shift);
        acc = acc + w * d * d;
    });
    acc
}

/// Cost and its first two shift derivatives for a pair of grid densities.
fn shifted_cost_derivs<T: Real>(a: &CdfTable<T>, b: &CdfTable<T>, shift: T) -> (T, T, T) {
    let cuts = partition(a.breakpoints(), b.breakpoints(), shift);
    let (mut c, mut g, mut hs) = (T::zero(), T::zero(), T::zero());
    for_each_node(&cuts, |t, w| {
        let qa = a.quantile(t);
        let (qb, dqb, d2qb) = b.quantile_derivs(t + shift);
        let d = qa - qb;
        c = c + w * d * d;
        g = g - w * (d + d) * dqb;
        hs = hs + w * (dqb * dqb - d * d2qb) * T::lit(2.0);
    });
    (c, g, hs)
}

/// Golden-section minimization of the shifted cost over `[-1, 1]`; works for
/// any pair of measures, including atomic ones.
pub fn circle_coupling<T: Real, A: CircleMeasure<T> + ?Sized, B: CircleMeasure<T> + ?Sized>(
    a: &A,
    b: &B,
) -> CircleCoupling<T> {
    let ratio = T::lit(0.618_033_988_749_894_8);
    let tol = T::lit(SHIFT_TOLERANCE);
    let (mut lo, mut hi) = (-T::one(), T::one());
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut c1 = shifted_cost(a, b, x1);
    let mut c2 = shifted_cost(a, b, x2);
    while hi - lo > tol {
        if c1 <= c2 {
            hi = x2;
            x2 = x1;
            c2 = c1;
            x1 = hi - ratio * (hi - lo);
            c1 = shifted_cost(a, b, x1);
        } else {
            lo = x1;
            x1 = x2;
            c1 = c2;
            x2 = lo + ratio * (hi - lo);
            c2 = shifted_cost(a, b, x2);
        }
    }
    let shift = (lo + hi) * T::lit(0.5);
    let cost = shifted_cost(a, b, shift);
    let (shift, cost) = [(x1, c1), (x2, c2), (shift, cost)]
        .into_iter()
        .fold((shift, cost), |best, cand| if cand.1 < best.1 { cand } else { best });
    CircleCoupling { shift, cost }
}

/// Safeguarded Newton on the convex shift objective of two grid densities.
/// The derivative is monotone, so its sign maintains a bracket.
pub fn density_coupling<T: Real>(a: &CdfTable<T>, b: &CdfTable<T>) -> CircleCoupling<T> {
    let tol = T::lit(1e-13);
    let (mut lo, mut hi) = (-T::one(), T::one());
    let mut shift = T::zero();
    for _ in 0..200 {
        let (_, g, hs) = shifted_cost_derivs(a, b, shift);
        if g > T::zero() {
            hi = shift;
        } else if g < T::zero() {
            lo = shift;
        } else {
            break;
        }
        let mut next = if hs > T::zero() { shift - g / hs } else { shift };
        if !(next > lo && next < hi) {
            next = (lo + hi) * T::lit(0.5);
        }
        let step = (next - shift).abs();
        shift = next;
        if step <= tol || hi - lo <= tol {
            break;
        }
    }
    CircleCoupling {
        shift,
        cost: shifted_cost(a, b, shift),
    }
}

/// Circle `W₂` between two grid densities.
pub fn w2_circle<T: Real>(f1: &Density<T>, f2: &Density<T>) -> Result<T> {
    f1.same_grid(f2)?;
    Ok(density_coupling(&CdfTable::new(f1), &CdfTable::new(f2)).distance())
}

/// Circle `W₂` between arbitrary measures.
pub fn w2_measures<T: Real, A: CircleMeasure<T> + ?Sized, B: CircleMeasure<T> + ?Sized>(a: &A, b: &B) -> T {
    circle_coupling(a, b).distance()
}

/// Monotone optimal map `T` with `T_# f1 = f2`, sampled at the grid nodes.
pub fn optimal_map<T: Real>(f1: &Density<T>, f2: &Density<T>) -> Result<TransportMap<T>> {
    f1.same_grid(f2)?;
    let a = CdfTable::new(f1);
    let b = CdfTable::new(f2);
    let coupling = density_coupling(&a, &b);
    Ok(map_from_coupling(&a, &b, coupling.shift))
}

fn map_from_coupling<T: Real>(a: &CdfTable<T>, b: &CdfTable<T>, shift: T) -> TransportMap<T> {
    let n = a.grid.len();
    let values = (0..n).map(|i| b.quantile(a.cumulative[i] + shift)).collect();
    TransportMap::new(a.grid, values).expect("quantile composition of positive densities is strictly monotone")
}

/// Displacement interpolant `f^s = (T_s)_# f1`, `T_s = (1 − s) id + s T`.
#[derive(Debug, Clone)]
pub struct GeodesicPoint<T> {
    pub s: T,
    /// `f^s` averaged over the grid cells `[x_j − h/2, x_j + h/2]`.
    pub density: Density<T>,
    /// `f1(x_i)` at the source nodes.
    pub source_f1: Vec<T>,
    /// `f2(T(x_i))`.
    pub source_f2: Vec<T>,
    /// Closed form `f^s(T_s(x_i)) = f1 f2∘T / (s f1 + (1 − s) f2∘T)`.
    pub source_values: Vec<T>,
    /// `T_s(x_i)`.
    pub positions: Vec<T>,
}

/// Precomputed pair `(f1, f2)` with its optimal coupling, for sampling the
/// geodesic at many `s`.
#[derive(Debug, Clone)]
pub struct Geodesic<T> {
    a: CdfTable<T>,
    b: CdfTable<T>,
    shift: T,
    distance: T,
    disp_lo: T,
    disp_hi: T,
}

impl<T: Real> Geodesic<T> {
    pub fn new(f1: &Density<T>, f2: &Density<T>) -> Result<Self> {
        f1.same_grid(f2)?;
        let a = CdfTable::new(f1);
        let b = CdfTable::new(f2);
        let coupling = density_coupling(&a, &b);
        let map = map_from_coupling(&a, &b, coupling.shift);
        let h = a.grid.spacing();
        let (lo, hi) = crate::grid::min_max(&map.displacement());
        Ok(Self {
            a,
            b,
            shift: coupling.shift,
            distance: coupling.distance(),
            disp_lo: lo - h - h,
            disp_hi: hi + h + h,
        })
    }

    pub fn distance(&self) -> T {
        self.distance
    }

    pub fn shift(&self) -> T {
        self.shift
    }

    /// Continuous optimal map `T(x) = Q₂(F₁(x) + θ)`.
    pub fn map(&self, x: T) -> T {
        self.b.quantile(self.a.cdf(x) + self.shift)
    }

    fn interpolated_map(&self, s: T, x: T) -> T {
        (T::one() - s) * x + s * self.map(x)
    }

    /// Solves `T_s(x) = y` by bracketed Newton.
    fn inverse_interpolated(&self, s: T, y: T, guess: T) -> T {
        let (mut lo, mut hi) = (y - s * self.disp_hi, y - s * self.disp_lo);
        let mut x = guess.max(lo).min(hi);
        let tol = T::epsilon() * T::lit(8.0);
        for _ in 0..100 {
            let val = self.interpolated_map(s, x) - y;
            if val > T::zero() {
                hi = x;
            } else {
                lo = x;
            }
            let f1 = self.a.density_at(x);
            let f2 = self.b.density_at(self.map(x));
            let slope = (T::one() - s) + s * f1 / f2;
            let mut next = x - val / slope;
            if !(next > lo && next < hi) {
                next = (lo + hi) * T::lit(0.5);
            }
            let step = (next - x).abs();
            x = next;
            if step <= tol * (T::one() + x.abs()) || hi - lo <= tol {
                break;
            }
        }
        x
    }

    /// Samples the geodesic at `s ∈ [0, 1]`.
    pub fn at(&self, s: T) -> Result<GeodesicPoint<T>> {
        if !(s >= T::zero() && s <= T::one()) {
            return Err(VfdError::InvalidParams(format!(
                "interpolation parameter {s} outside [0, 1]"
            )));
        }
        let grid = self.a.grid;
        let n = grid.len();
        let h = grid.spacing();
        let half = h * T::lit(0.5);

        let mut source_f1 = Vec::with_capacity(n);
        let mut source_f2 = Vec::with_capacity(n);
        let mut source_values = Vec::with_capacity(n);
        let mut positions = Vec::with_capacity(n);
        for i in 0..n {
            let x = grid.node(i);
            let tx = self.map(x);
            let p = self.a.values[i];
            let q = self.b.density_at(tx);
            source_f1.push(p);
            source_f2.push(q);
            source_values.push(p * q / (s * p + (T::one() - s) * q));
            positions.push((T::one() - s) * x + s * tx);
        }

        // cumulative mass of f^s at the cell faces x_j - h/2, j = 0..=n
        let mut guess = -half;
        let mut faces = Vec::with_capacity(n + 1);
        for j in 0..=n {
            let y = T::from_usize_lossy(j) * h - half;
            let x = self.inverse_interpolated(s, y, guess);
            guess = x + h;
            faces.push(self.a.cdf(x));
        }
        let values: Vec<T> = faces.windows(2).map(|w| (w[1] - w[0]) / h).collect();
        let density = Density::new(grid, values)?;
        Ok(GeodesicPoint {
            s,
            density,
            source_f1,
            source_f2,
            source_values,
            positions,
        })
    }
}

/// `f^s = (T_s)_# f1` resampled on the grid.
pub fn displacement_interpolate<T: Real>(f1: &Density<T>, f2: &Density<T>, s: T) -> Result<Density<T>> {
    Ok(Geodesic::new(f1, f2)?.at(s)?.density)
}

/// Largest deviation of `k · W₂(f^{s_j}, f^{s_{j+1}})` from `W₂(f1, f2)` over
/// the `k` consecutive pieces of the geodesic; zero for a constant-speed
/// geodesic.
pub fn geodesic_action<T: Real>(f1: &Density<T>, f2: &Density<T>, k: usize) -> Result<T> {
    if k < 3 {
        return Err(VfdError::InvalidParams("geodesic_action needs k >= 3".into()));
    }
    let geo = Geodesic::new(f1, f2)?;
    let kk = T::from_usize_lossy(k);
    let samples = (0..=k)
        .map(|j| geo.at(T::from_usize_lossy(j) / kk).map(|p| p.density))
        .collect::<Result<Vec<_>>>()?;
    let mut worst = T::zero();
    for w in samples.windows(2) {
        let piece = w2_circle(&w[0], &w[1])?;
        worst = worst.max((kk * piece - geo.distance()).abs());
    }
    Ok(worst)
}
