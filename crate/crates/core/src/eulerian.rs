//! Implicit finite-volume solver for `∂t f = −r ∂x(f ∂x(ρ/f^{r+1}))` on the
//! circle.
//!
//! The unknown is `u = f/m` with `m = ρ^{1/(r+1)}`, in which the equation
//! reads `∂t u = −(r+1)/m ∂x(m ∂x u^{−r})`. Constants in `u` are steady
//! states of the discrete scheme as well, and its Newton Jacobian is an
//! M-matrix, which gives a discrete comparison principle.

use std::sync::Arc;

use crate::density::Density;
use crate::diagnostics::{RowBuilder, TimeSeriesRow};
use crate::error::{Result, VfdError};
use crate::grid::{max_abs, min_max, PeriodicGrid};
use crate::linalg::solve_cyclic_tridiagonal;
use crate::params::Params;
use crate::rho::RhoSpec;
use crate::scalar::Real;

/// Maximum number of successive step halvings after a Newton failure.
pub const MAX_HALVINGS: u32 = 10;

/// Solution snapshot. `f = u·m` holds identically.
#[derive(Debug, Clone)]
pub struct EulerianState<T> {
    t: T,
    f: Density<T>,
    u: Vec<T>,
    m: Arc<[T]>,
}

impl<T: Real> EulerianState<T> {
    pub fn t(&self) -> T {
        self.t
    }

    pub fn density(&self) -> &Density<T> {
        &self.f
    }

    pub fn u(&self) -> &[T] {
        &self.u
    }

    pub fn m(&self) -> &[T] {
        &self.m
    }

    /// `h Σ u_i m_i`.
    pub fn mass(&self) -> T {
        self.f
            .grid()
            .h_sum(self.u.iter().zip(self.m.iter()).map(|(&u, &m)| u * m))
    }
}

/// Grid-dependent data of the scheme for a fixed `ρ` and `r`.
#[derive(Debug, Clone)]
pub struct EulerianSolver<T> {
    grid: PeriodicGrid<T>,
    params: Params<T>,
    m: Arc<[T]>,
    /// Arithmetic face means `m_{i+½}`.
    m_face: Vec<T>,
}

struct NewtonFailure<T> {
    residual: T,
    iterations: usize,
}

impl<T: Real> EulerianSolver<T> {
    pub fn new(rho: &RhoSpec<T>, grid: PeriodicGrid<T>, params: Params<T>) -> Result<Self> {
        params.validate()?;
        let p = (params.r + T::one()).recip();
        let m: Vec<T> = grid.sample(|x| rho.value(x).powf(p));
        let m_face = grid.face_mean(&m);
        Ok(Self {
            grid,
            params,
            m: m.into(),
            m_face,
        })
    }

    pub fn grid(&self) -> &PeriodicGrid<T> {
        &self.grid
    }

    pub fn params(&self) -> &Params<T> {
        &self.params
    }

    pub fn state(&self, t: T, f: Density<T>) -> Result<EulerianState<T>> {
        if f.grid() != &self.grid {
            return Err(VfdError::GridMismatch {
                left: self.grid.len(),
                right: f.grid().len(),
            });
        }
        let u = f.values().iter().zip(self.m.iter()).map(|(&f, &m)| f / m).collect();
        Ok(EulerianState {
            t,
            f,
            u,
            m: Arc::clone(&self.m),
        })
    }

    fn residual(&self, u: &[T], u_old: &[T], c: T, out: &mut [T]) {
        let n = self.grid.len();
        let r = self.params.r;
        let v: Vec<T> = u.iter().map(|&x| x.powf(-r)).collect();
        let flux: Vec<T> = (0..n).map(|i| self.m_face[i] * (v[self.grid.next(i)] - v[i])).collect();
        for i in 0..n {
            out[i] = self.m[i] * (u[i] - u_old[i]) + c * (flux[i] - flux[self.grid.prev(i)]);
        }
    }

    fn newton(&self, u_old: &[T], dt: T) -> std::result::Result<Vec<T>, NewtonFailure<T>> {
        let n = self.grid.len();
        let h = self.grid.spacing();
        let r = self.params.r;
        let tol = self.params.newton_tol;
        let c = dt * (r + T::one()) / (h * h);
        let mut u = u_old.to_vec();
        let mut res = vec![T::zero(); n];
        self.residual(&u, u_old, c, &mut res);
        let mut norm = max_abs(&res);
        let mut lower = vec![T::zero(); n];
        let mut diag = vec![T::zero(); n];
        let mut upper = vec![T::zero(); n];
        let mut trial = vec![T::zero(); n];
        let mut trial_res = vec![T::zero(); n];
        for it in 0..self.params.newton_max_iter {
            if norm <= tol {
                return Ok(u);
            }
            // |dv/du| = r u^{-r-1}
            let dv: Vec<T> = u.iter().map(|&x| r * x.powf(-(r + T::one()))).collect();
            for i in 0..n {
                let (ip, im) = (self.grid.next(i), self.grid.prev(i));
                let (mp, mm) = (self.m_face[i], self.m_face[im]);
                diag[i] = self.m[i] + c * (mp + mm) * dv[i];
                upper[i] = -c * mp * dv[ip];
                lower[i] = -c * mm * dv[im];
            }
            let rhs: Vec<T> = res.iter().map(|&x| -x).collect();
            let delta = solve_cyclic_tridiagonal(&lower, &diag, &upper, &rhs).map_err(|_| NewtonFailure {
                residual: norm,
                iterations: it,
            })?;
            let mut tau = T::one();
            let mut accepted = false;
            for _ in 0..40 {
                let mut positive = true;
                for i in 0..n {
                    trial[i] = u[i] + tau * delta[i];
                    positive &= trial[i] > T::zero();
                }
                if positive {
                    self.residual(&trial, u_old, c, &mut trial_res);
                    let trial_norm = max_abs(&trial_res);
                    if trial_norm < norm || trial_norm <= tol {
                        std::mem::swap(&mut u, &mut trial);
                        std::mem::swap(&mut res, &mut trial_res);
                        norm = trial_norm;
                        accepted = true;
                        break;
                    }
                }
                tau = tau * T::lit(0.5);
            }
            if !accepted {
                return Err(NewtonFailure {
                    residual: norm,
                    iterations: it + 1,
                });
            }
        }
        if norm <= tol {
            Ok(u)
        } else {
            Err(NewtonFailure {
                residual: norm,
                iterations: self.params.newton_max_iter,
            })
        }
    }

    /// One backward-Euler step of length `dt`, without retries.
    pub fn step(&self, state: &EulerianState<T>, dt: T) -> Result<EulerianState<T>> {
        let u = self.newton(&state.u, dt).map_err(|fail| VfdError::NewtonDivergence {
            t: state.t.to_f64_lossy(),
            dt: dt.to_f64_lossy(),
            residual: fail.residual.to_f64_lossy(),
            iterations: fail.iterations,
        })?;
        let values = u.iter().zip(self.m.iter()).map(|(&u, &m)| u * m).collect();
        Ok(EulerianState {
            t: state.t + dt,
            f: Density::new(self.grid, values)?,
            u,
            m: Arc::clone(&self.m),
        })
    }

    /// Advances by `dt`, splitting into halves on Newton failure up to
    /// [`MAX_HALVINGS`] levels deep. Every accepted sub-step is passed to
    /// `visit`.
    pub fn advance(
        &self,
        state: &EulerianState<T>,
        dt: T,
        visit: &mut dyn FnMut(&EulerianState<T>),
    ) -> Result<(EulerianState<T>, u32)> {
        self.advance_level(state, dt, 0, visit)
    }

    fn advance_level(
        &self,
        state: &EulerianState<T>,
        dt: T,
        level: u32,
        visit: &mut dyn FnMut(&EulerianState<T>),
    ) -> Result<(EulerianState<T>, u32)> {
        match self.step(state, dt) {
            Ok(next) => {
                visit(&next);
                Ok((next, level))
            }
            Err(err @ VfdError::NewtonDivergence { .. }) if level >= MAX_HALVINGS => Err(err),
            Err(VfdError::NewtonDivergence { .. }) => {
                let half = dt * T::lit(0.5);
                let (mid, a) = self.advance_level(state, half, level + 1, visit)?;
                let (end, b) = self.advance_level(&mid, half, level + 1, visit)?;
                Ok((end, a.max(b)))
            }
            Err(err) => Err(err),
        }
    }
}

/// Single backward-Euler step with the step size from `p`.
pub fn step_implicit<T: Real>(state: &EulerianState<T>, rho: &RhoSpec<T>, p: &Params<T>) -> Result<EulerianState<T>> {
    let solver = EulerianSolver::new(rho, *state.density().grid(), *p)?;
    solver.step(state, p.dt)
}

/// Consumer of diagnostics rows; one sink per run.
pub trait DiagnosticsSink<T> {
    fn record(&mut self, row: TimeSeriesRow<T>);

    /// Rows are only computed when this returns `true`.
    fn wants_rows(&self) -> bool {
        true
    }
}

impl<T> DiagnosticsSink<T> for Vec<TimeSeriesRow<T>> {
    fn record(&mut self, row: TimeSeriesRow<T>) {
        self.push(row);
    }
}

/// Discards everything.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullSink;

impl<T> DiagnosticsSink<T> for NullSink {
    fn record(&mut self, _: TimeSeriesRow<T>) {}

    fn wants_rows(&self) -> bool {
        false
    }
}

/// Adapts a closure into a sink.
pub struct FnSink<F>(pub F);

impl<T, F: FnMut(TimeSeriesRow<T>)> DiagnosticsSink<T> for FnSink<F> {
    fn record(&mut self, row: TimeSeriesRow<T>) {
        (self.0)(row)
    }
}

/// Output of [`evolve`].
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    /// Initial state, every `output_every`-th step and the final state.
    pub snapshots: Vec<EulerianState<T>>,
    /// Extremes of `f` over every accepted step, including sub-steps.
    pub min_f: T,
    pub max_f: T,
    /// Extremes of `u` over every accepted step.
    pub min_u: T,
    pub max_u: T,
    pub steps: usize,
    /// Deepest halving level that was needed.
    pub max_halvings: u32,
}

impl<T: Real> Trajectory<T> {
    pub fn last(&self) -> &EulerianState<T> {
        self.snapshots.last().expect("trajectory holds the initial state")
    }
}

/// Runs the solver from `f0` to `p.t_end`, computing rows (with the
/// distance to equilibrium) when the sink asks for them.
pub fn evolve<T: Real>(
    f0: &Density<T>,
    rho: &RhoSpec<T>,
    p: &Params<T>,
    sink: &mut dyn DiagnosticsSink<T>,
) -> Result<Trajectory<T>> {
    let solver = EulerianSolver::new(rho, *f0.grid(), *p)?;
    let rows = sink.wants_rows().then(|| RowBuilder::new(rho, p.r, *f0.grid()));
    evolve_with(&solver, f0, rows.as_ref(), sink)
}

/// [`evolve`] with a prepared solver and row builder.
pub fn evolve_with<T: Real>(
    solver: &EulerianSolver<T>,
    f0: &Density<T>,
    rows: Option<&RowBuilder<T>>,
    sink: &mut dyn DiagnosticsSink<T>,
) -> Result<Trajectory<T>> {
    let p = *solver.params();
    let mut state = solver.state(T::zero(), f0.clone())?;
    let (mut min_f, mut max_f) = state.f.min_max();
    let (mut min_u, mut max_u) = min_max(&state.u);
    let emit = |sink: &mut dyn DiagnosticsSink<T>, s: &EulerianState<T>| -> Result<()> {
        if let Some(b) = rows {
            sink.record(b.row(s.t, &s.f)?);
        }
        Ok(())
    };
    emit(sink, &state)?;
    let mut snapshots = vec![state.clone()];
    let steps = p.step_count();
    let mut max_halvings = 0;
    for k in 1..=steps {
        let target = if k == steps {
            p.t_end
        } else {
            T::from_usize_lossy(k) * p.dt
        };
        let dt = target - state.t;
        let mut visit = |s: &EulerianState<T>| {
            let (lo, hi) = s.f.min_max();
            min_f = min_f.min(lo);
            max_f = max_f.max(hi);
            let (lo, hi) = min_max(&s.u);
            min_u = min_u.min(lo);
            max_u = max_u.max(hi);
        };
        let (mut next, level) = solver.advance(&state, dt, &mut visit)?;
        next.t = target;
        max_halvings = max_halvings.max(level);
        state = next;
        if k % p.output_every == 0 || k == steps {
            emit(sink, &state)?;
            snapshots.push(state.clone());
        }
    }
    Ok(Trajectory {
        snapshots,
        min_f,
        max_f,
        min_u,
        max_u,
        steps,
        max_halvings,
    })
}

/// Comparison constants `c₀ = λ^{1/(r+1)} a₁`, `C₀ = A₁ / λ^{1/(r+1)}` for
/// data with `a₁ ≤ f ≤ A₁`.
pub fn comparison_constants<T: Real>(lambda: T, r: T, a1: T, big_a1: T) -> (T, T) {
    let s = lambda.powf((r + T::one()).recip());
    (s * a1, big_a1 / s)
}

/// Bounds `a = a₁ λ^{2/(r+1)}`, `A = A₁ / λ^{2/(r+1)}` on `f` for all times.
pub fn density_bounds<T: Real>(lambda: T, r: T, a1: T, big_a1: T) -> (T, T) {
    let s = lambda.powf(T::lit(2.0) / (r + T::one()));
    (a1 * s, big_a1 / s)
}

/// Largest violations of the barriers `c_low ≤ u ≤ c_high`, measured by
/// `h Σ (u − c_low)₋ m` and `h Σ (u − c_high)₊ m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonReport<T> {
    pub below: T,
    pub above: T,
    pub holds: bool,
}

pub const COMPARISON_SLACK: f64 = 1e-9;

pub fn comparison_check<T: Real>(traj: &[EulerianState<T>], c_low: T, c_high: T) -> ComparisonReport<T> {
    let (mut below, mut above) = (T::zero(), T::zero());
    for s in traj {
        let g = s.f.grid();
        let lo = g.h_sum(
            s.u.iter()
                .zip(s.m.iter())
                .map(|(&u, &m)| (c_low - u).max(T::zero()) * m),
        );
        let hi = g.h_sum(
            s.u.iter()
                .zip(s.m.iter())
                .map(|(&u, &m)| (u - c_high).max(T::zero()) * m),
        );
        below = below.max(lo);
        above = above.max(hi);
    }
    let slack = T::lit(COMPARISON_SLACK);
    ComparisonReport {
        below,
        above,
        holds: below <= slack && above <= slack,
    }
}

/// Closed-form initial data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Constant,
    /// The equilibrium `γρ^{1/(r+1)}`.
    Stationary,
    /// `1 + 0.1 cos 2πx`.
    Cosine,
    /// `1 + 0.5 cos 4πx`.
    TwoBump,
}

impl std::str::FromStr for Preset {
    type Err = VfdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Self::Constant),
            "stationary" => Ok(Self::Stationary),
            "cosine" => Ok(Self::Cosine),
            "two-bump" | "two_bump" => Ok(Self::TwoBump),
            other => Err(VfdError::InvalidParams(format!("unknown preset `{other}`"))),
        }
    }
}

/// Initial datum, normalized to unit mass when sampled.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialDatum<T> {
    Preset(Preset),
    /// `1 + Σ a_k cos 2πkx + b_k sin 2πkx`.
    Fourier {
        cos: Vec<T>,
        sin: Vec<T>,
    },
}

impl<T: Real> InitialDatum<T> {
    pub fn sample(&self, grid: PeriodicGrid<T>, rho: &RhoSpec<T>, r: T) -> Result<Density<T>> {
        let c = |v: f64| vec![T::lit(v)];
        match self {
            Self::Preset(Preset::Constant) => Ok(Density::uniform(grid)),
            Self::Preset(Preset::Stationary) => Ok(crate::diagnostics::stationary_density(rho, r, grid)),
            Self::Preset(Preset::Cosine) => Density::fourier(grid, &c(0.1), &[]),
            Self::Preset(Preset::TwoBump) => Density::fourier(grid, &[T::zero(), T::lit(0.5)], &[]),
            Self::Fourier { cos, sin } => Density::fourier(grid, cos, sin),
        }
    }
}
